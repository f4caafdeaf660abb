"""Knowledge-fusing answer scorer over extracted path subgraphs.

Per candidate the model refines subgraph concept embeddings with a
relation-aware attention network, encodes each surviving path with a
bidirectional GRU, fuses paths within a concept pair by attention against the
pair's contextual representation, fuses pairs by attention against the whole
question-candidate encoding, averages answer-concept embeddings, and gates
the fused knowledge vector against the contextual summary before a small MLP
produces the candidate logit. Softmax over the five candidate logits gives
answer probabilities; training minimizes mean cross entropy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .autodiff import Tensor, add_n, concat, dot, log_softmax, matvec, pack, softmax
from .errors import DataError


@dataclass(frozen=True)
class ModelDims:
    d_h: int = 100       # contextual encoder width
    d_g: int = 100       # concept embedding width (must match the KGE table)
    d_r: int = 100       # relation embedding width
    d_att: int = 100     # bilinear attention space width
    d_gru: int = 150     # GRU hidden width per direction
    d_k: int = 100       # fused knowledge vector width
    gat_layers: int = 2

    def __post_init__(self) -> None:
        for name in ("d_h", "d_g", "d_r", "d_att", "d_gru", "d_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.gat_layers <= 3:
            raise ValueError("gat_layers must be in [0, 3]")

    @property
    def d_u(self) -> int:
        """Path encoding width: forward and backward GRU states concatenated."""
        return 2 * self.d_gru

    @property
    def d_step(self) -> int:
        """Path step input width: head, relation, tail embeddings."""
        return 2 * self.d_g + self.d_r


@dataclass(frozen=True)
class Ablation:
    uniform_path_weights: bool = False  # replace within-pair attention by mean
    uniform_pair_weights: bool = False  # replace across-pair attention by mean


# -- per-candidate inputs -----------------------------------------------------

@dataclass
class PathInput:
    """One surviving path, in local subgraph node indices."""

    node_idxs: tuple[int, ...]
    rel_ids: tuple[int, ...]  # rows of the relation table, inverse ids allowed

    def __post_init__(self) -> None:
        if len(self.node_idxs) != len(self.rel_ids) + 1 or not self.rel_ids:
            raise ValueError("path needs k relations joining k+1 nodes")


@dataclass
class GroupInput:
    """Paths between one question concept and one answer concept."""

    src_idx: int
    dst_idx: int
    src_ctx: np.ndarray  # (d_h,) contextual span representation
    dst_ctx: np.ndarray
    paths: list[PathInput]

    def __post_init__(self) -> None:
        if not self.paths:
            raise ValueError("group must hold at least one path")


@dataclass
class CandidateInput:
    """Everything the scorer needs for one question-candidate pair."""

    node_feats: np.ndarray  # (N, d_g) knowledge embeddings of subgraph nodes
    edges: list[tuple[int, int, int]]  # (head idx, base relation id, tail idx)
    groups: list[GroupInput]
    answer_idxs: list[int]  # subgraph indices of grounded answer concepts
    h0: np.ndarray  # (d_h,) contextual summary of question plus candidate

    def validate(self, dims: ModelDims) -> None:
        n = self.node_feats.shape[0]
        if self.node_feats.ndim != 2 or (n and self.node_feats.shape[1] != dims.d_g):
            raise ValueError(
                f"node features must be (N, {dims.d_g}), got {self.node_feats.shape}"
            )
        if self.h0.shape != (dims.d_h,):
            raise ValueError(f"contextual summary must be ({dims.d_h},)")
        for a, _, b in self.edges:
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError("edge endpoint outside subgraph")
        for idx in self.answer_idxs:
            if not 0 <= idx < n:
                raise ValueError("answer index outside subgraph")
        for grp in self.groups:
            if grp.src_ctx.shape != (dims.d_h,) or grp.dst_ctx.shape != (dims.d_h,):
                raise ValueError(f"pair context must be ({dims.d_h},)")
            if not (0 <= grp.src_idx < n and 0 <= grp.dst_idx < n):
                raise ValueError("group endpoint outside subgraph")
            for p in grp.paths:
                if any(not 0 <= j < n for j in p.node_idxs):
                    raise ValueError("path node outside subgraph")


# -- parameters ---------------------------------------------------------------

@dataclass
class GatLayerParams:
    rel_key: Tensor     # (d_att, d_r) relation row to attention key
    self_proj: Tensor   # (d_att, d_g) target node to attention space
    neigh_proj: Tensor  # (d_att, d_g) neighbor node to attention space
    out_proj: Tensor    # (d_g, 2*d_g) joint message back to node width
    out_bias: Tensor    # (d_g,)


@dataclass
class GruParams:
    update_in: Tensor   # (d_gru, d_step)
    update_rec: Tensor  # (d_gru, d_gru)
    update_bias: Tensor
    reset_in: Tensor
    reset_rec: Tensor
    reset_bias: Tensor
    cand_in: Tensor
    cand_rec: Tensor
    cand_bias: Tensor


@dataclass
class ModelParams:
    gat: list[GatLayerParams]
    gru_fwd: GruParams
    gru_bwd: GruParams
    pair_ctx_proj: Tensor   # (d_att, 2*d_h) pair context to path-attention query
    path_proj: Tensor       # (d_att, d_u) path encoding to path-attention key
    global_proj: Tensor     # (d_att, d_h) summary to pair-attention query
    pair_feat_proj: Tensor  # (d_att, 2*d_g + 2*d_h) pair features to key
    pair_out_w: Tensor      # (d_k, 2*d_g + d_u) per-pair knowledge vector
    pair_out_b: Tensor
    fuse_w: Tensor          # (d_k, d_k + d_g) joins path and answer knowledge
    fuse_b: Tensor
    text_w: Tensor          # (d_k, d_h) contextual summary to gate space
    text_b: Tensor
    gate_w: Tensor          # (d_k, d_h + d_k) elementwise gate logits
    gate_b: Tensor
    mlp_hidden_w: Tensor    # (d_k // 2, d_k)
    mlp_hidden_b: Tensor
    mlp_out_w: Tensor       # (d_k // 2,)
    mlp_out_b: Tensor       # ()
    rel_emb: Tensor         # (2R, d_r) base rows then negated inverse rows


@dataclass
class SketchModel:
    dims: ModelDims
    params: ModelParams
    seed: int
    train_relations: bool = False

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        p = self.params
        out: list[tuple[str, Tensor]] = []
        for i, layer in enumerate(p.gat):
            out += [
                (f"gat.{i}.rel_key", layer.rel_key),
                (f"gat.{i}.self_proj", layer.self_proj),
                (f"gat.{i}.neigh_proj", layer.neigh_proj),
                (f"gat.{i}.out_proj", layer.out_proj),
                (f"gat.{i}.out_bias", layer.out_bias),
            ]
        for tag, gp in (("gru_fwd", p.gru_fwd), ("gru_bwd", p.gru_bwd)):
            out += [
                (f"{tag}.update_in", gp.update_in),
                (f"{tag}.update_rec", gp.update_rec),
                (f"{tag}.update_bias", gp.update_bias),
                (f"{tag}.reset_in", gp.reset_in),
                (f"{tag}.reset_rec", gp.reset_rec),
                (f"{tag}.reset_bias", gp.reset_bias),
                (f"{tag}.cand_in", gp.cand_in),
                (f"{tag}.cand_rec", gp.cand_rec),
                (f"{tag}.cand_bias", gp.cand_bias),
            ]
        out += [
            ("pair_ctx_proj", p.pair_ctx_proj),
            ("path_proj", p.path_proj),
            ("global_proj", p.global_proj),
            ("pair_feat_proj", p.pair_feat_proj),
            ("pair_out_w", p.pair_out_w),
            ("pair_out_b", p.pair_out_b),
            ("fuse_w", p.fuse_w),
            ("fuse_b", p.fuse_b),
            ("text_w", p.text_w),
            ("text_b", p.text_b),
            ("gate_w", p.gate_w),
            ("gate_b", p.gate_b),
            ("mlp_hidden_w", p.mlp_hidden_w),
            ("mlp_hidden_b", p.mlp_hidden_b),
            ("mlp_out_w", p.mlp_out_w),
            ("mlp_out_b", p.mlp_out_b),
            ("rel_emb", p.rel_emb),
        ]
        return out

    def trainable_parameters(self) -> list[tuple[str, Tensor]]:
        named = self.named_parameters()
        if self.train_relations:
            return named
        return [(n, t) for n, t in named if n != "rel_emb"]


def _xavier(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    if len(shape) == 2:
        fan_out, fan_in = shape
    else:
        fan_out, fan_in = 1, shape[0]
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=shape)


def init_model(
    dims: ModelDims,
    rel_table: np.ndarray,
    seed: int = 0,
    train_relations: bool = False,
    zero: bool = False,
) -> SketchModel:
    """Build a model with Xavier-uniform weights and zero biases.

    rel_table is the (2R, d_r) relation embedding table (inverse rows
    included); it is copied in and only updated when train_relations is set.
    Weights are drawn in declaration order from one seeded generator, so
    equal seeds give identical models. zero=True makes every weight zero,
    which pins all logits to zero (uniform candidate probabilities).
    """
    if rel_table.ndim != 2 or rel_table.shape[1] != dims.d_r:
        raise ValueError(f"relation table must be (2R, {dims.d_r})")
    rng = np.random.default_rng(seed)

    def w(*shape: int) -> Tensor:
        if zero:
            return Tensor(np.zeros(shape))
        return Tensor(_xavier(rng, shape))

    def b(*shape: int) -> Tensor:
        return Tensor(np.zeros(shape))

    gat = [
        GatLayerParams(
            rel_key=w(dims.d_att, dims.d_r),
            self_proj=w(dims.d_att, dims.d_g),
            neigh_proj=w(dims.d_att, dims.d_g),
            out_proj=w(dims.d_g, 2 * dims.d_g),
            out_bias=b(dims.d_g),
        )
        for _ in range(dims.gat_layers)
    ]

    def gru() -> GruParams:
        return GruParams(
            update_in=w(dims.d_gru, dims.d_step),
            update_rec=w(dims.d_gru, dims.d_gru),
            update_bias=b(dims.d_gru),
            reset_in=w(dims.d_gru, dims.d_step),
            reset_rec=w(dims.d_gru, dims.d_gru),
            reset_bias=b(dims.d_gru),
            cand_in=w(dims.d_gru, dims.d_step),
            cand_rec=w(dims.d_gru, dims.d_gru),
            cand_bias=b(dims.d_gru),
        )

    params = ModelParams(
        gat=gat,
        gru_fwd=gru(),
        gru_bwd=gru(),
        pair_ctx_proj=w(dims.d_att, 2 * dims.d_h),
        path_proj=w(dims.d_att, dims.d_u),
        global_proj=w(dims.d_att, dims.d_h),
        pair_feat_proj=w(dims.d_att, 2 * dims.d_g + 2 * dims.d_h),
        pair_out_w=w(dims.d_k, 2 * dims.d_g + dims.d_u),
        pair_out_b=b(dims.d_k),
        fuse_w=w(dims.d_k, dims.d_k + dims.d_g),
        fuse_b=b(dims.d_k),
        text_w=w(dims.d_k, dims.d_h),
        text_b=b(dims.d_k),
        gate_w=w(dims.d_k, dims.d_h + dims.d_k),
        gate_b=b(dims.d_k),
        mlp_hidden_w=w(max(1, dims.d_k // 2), dims.d_k),
        mlp_hidden_b=b(max(1, dims.d_k // 2)),
        mlp_out_w=w(max(1, dims.d_k // 2)),
        mlp_out_b=b(),
        rel_emb=Tensor(np.array(rel_table, dtype=np.float64)),
    )
    return SketchModel(dims=dims, params=params, seed=seed, train_relations=train_relations)


# -- forward pass -------------------------------------------------------------

def _rel_row(params: ModelParams, cache: dict[int, Tensor], rel_id: int) -> Tensor:
    if rel_id not in cache:
        cache[rel_id] = params.rel_emb.row(rel_id)
    return cache[rel_id]


def gat_encode(
    model: SketchModel,
    cand: CandidateInput,
    rel_cache: dict[int, Tensor],
    trace: dict | None = None,
) -> list[Tensor]:
    """Refine subgraph node embeddings through the attention layers.

    Messages flow along both edge directions; the reverse direction uses the
    inverse relation row. A node with no incident edges attends to itself.
    With zero layers the knowledge embeddings pass through untouched.
    """
    dims, params = model.dims, model.params
    n = cand.node_feats.shape[0]
    h = [Tensor(cand.node_feats[j]) for j in range(n)]
    if dims.gat_layers == 0 or n == 0:
        return h
    num_base = params.rel_emb.data.shape[0] // 2
    nbrs: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for a, r, bnode in cand.edges:
        nbrs[a].append((r, bnode))
        nbrs[bnode].append((r + num_base, a))
    for layer in params.gat:
        key_cache: dict[int, Tensor] = {}

        def rel_key(rel_id: int) -> Tensor:
            if rel_id not in key_cache:
                key_cache[rel_id] = matvec(layer.rel_key, _rel_row(params, rel_cache, rel_id))
            return key_cache[rel_id]

        new_h: list[Tensor] = []
        for j in range(n):
            if nbrs[j]:
                self_part = matvec(layer.self_proj, h[j])
                logits = []
                for rel_id, jn in nbrs[j]:
                    feat = (self_part + matvec(layer.neigh_proj, h[jn])).tanh()
                    logits.append(dot(rel_key(rel_id), feat))
                alpha = softmax(pack(logits))
                if trace is not None:
                    trace.setdefault("gat_weights", []).append(alpha.data.copy())
                msg = add_n([
                    alpha.pick(i) * concat([h[j], h[jn]])
                    for i, (_, jn) in enumerate(nbrs[j])
                ])
            else:
                msg = concat([h[j], h[j]])
            new_h.append((matvec(layer.out_proj, msg) + layer.out_bias).tanh())
        h = new_h
    return h


def _gru_states(gp: GruParams, xs: list[Tensor], d_gru: int) -> list[Tensor]:
    h = Tensor(np.zeros(d_gru))
    states = []
    for x in xs:
        z = (matvec(gp.update_in, x) + matvec(gp.update_rec, h) + gp.update_bias).sigmoid()
        r = (matvec(gp.reset_in, x) + matvec(gp.reset_rec, h) + gp.reset_bias).sigmoid()
        cand = (matvec(gp.cand_in, x) + matvec(gp.cand_rec, r * h) + gp.cand_bias).tanh()
        h = z * h + (1.0 - z) * cand
        states.append(h)
    return states


def encode_path(
    model: SketchModel,
    node_reps: Sequence[Tensor],
    path: PathInput,
    rel_cache: dict[int, Tensor],
) -> Tensor:
    """Mean over steps of joined forward and backward GRU states."""
    params = model.params
    xs = [
        concat([
            node_reps[path.node_idxs[i]],
            _rel_row(params, rel_cache, path.rel_ids[i]),
            node_reps[path.node_idxs[i + 1]],
        ])
        for i in range(len(path.rel_ids))
    ]
    fwd = _gru_states(params.gru_fwd, xs, model.dims.d_gru)
    bwd = _gru_states(params.gru_bwd, xs[::-1], model.dims.d_gru)[::-1]
    steps = [concat([f, b]) for f, b in zip(fwd, bwd)]
    return add_n(steps) / len(steps)


def fuse_group(
    model: SketchModel,
    group: GroupInput,
    path_encs: list[Tensor],
    ablation: Ablation,
    trace: dict | None = None,
) -> Tensor:
    """Attention-weighted sum of one pair's path encodings."""
    params = model.params
    if ablation.uniform_path_weights:
        if trace is not None:
            k = len(path_encs)
            trace.setdefault("path_weights", []).append(np.full(k, 1.0 / k))
        return add_n(path_encs) / len(path_encs)
    query = matvec(
        params.pair_ctx_proj,
        Tensor(np.concatenate([group.src_ctx, group.dst_ctx])),
    )
    logits = [dot(query, matvec(params.path_proj, u)) for u in path_encs]
    alpha = softmax(pack(logits))
    if trace is not None:
        trace.setdefault("path_weights", []).append(alpha.data.copy())
    return add_n([alpha.pick(i) * u for i, u in enumerate(path_encs)])


def forward_candidate(
    model: SketchModel,
    cand: CandidateInput,
    ablation: Ablation = Ablation(),
    trace: dict | None = None,
) -> Tensor:
    """Scalar logit for one candidate."""
    cand.validate(model.dims)
    dims, params = model.dims, model.params
    rel_cache: dict[int, Tensor] = {}
    node_reps = gat_encode(model, cand, rel_cache, trace)
    h0 = Tensor(cand.h0)

    if cand.groups:
        fused = []
        for group in cand.groups:
            encs = [encode_path(model, node_reps, p, rel_cache) for p in group.paths]
            fused.append(fuse_group(model, group, encs, ablation, trace))
        pair_vecs = []
        keys = []
        for group, u in zip(cand.groups, fused):
            src, dst = node_reps[group.src_idx], node_reps[group.dst_idx]
            pair_vecs.append(
                matvec(params.pair_out_w, concat([src, dst, u])) + params.pair_out_b
            )
            keys.append(concat([src, dst, Tensor(group.src_ctx), Tensor(group.dst_ctx)]))
        if ablation.uniform_pair_weights:
            k = len(pair_vecs)
            if trace is not None:
                trace.setdefault("pair_weights", []).append(np.full(k, 1.0 / k))
            knowledge = add_n(pair_vecs) / k
        else:
            query = matvec(params.global_proj, h0)
            logits = [dot(query, matvec(params.pair_feat_proj, key)) for key in keys]
            beta = softmax(pack(logits))
            if trace is not None:
                trace.setdefault("pair_weights", []).append(beta.data.copy())
            knowledge = add_n([beta.pick(i) * v for i, v in enumerate(pair_vecs)])
    else:
        knowledge = Tensor(np.zeros(dims.d_k))

    if cand.answer_idxs:
        answer = add_n([node_reps[i] for i in cand.answer_idxs]) / len(cand.answer_idxs)
    else:
        answer = Tensor(np.zeros(dims.d_g))

    fused_knowledge = matvec(params.fuse_w, concat([knowledge, answer])) + params.fuse_b
    z = (matvec(params.gate_w, concat([h0, fused_knowledge])) + params.gate_b).sigmoid()
    if trace is not None:
        trace.setdefault("gate_values", []).append(z.data.copy())
    text = matvec(params.text_w, h0) + params.text_b
    merged = z * text + (1.0 - z) * fused_knowledge
    hidden = (matvec(params.mlp_hidden_w, merged) + params.mlp_hidden_b).tanh()
    return dot(params.mlp_out_w, hidden) + params.mlp_out_b


def instance_logits(
    model: SketchModel,
    cands: Sequence[CandidateInput],
    ablation: Ablation = Ablation(),
    trace: dict | None = None,
) -> Tensor:
    logits = pack([forward_candidate(model, c, ablation, trace) for c in cands])
    if trace is not None:
        trace.setdefault("candidate_probs", []).append(
            softmax(logits).data.copy()
        )
    return logits


def instance_probs(
    model: SketchModel,
    cands: Sequence[CandidateInput],
    ablation: Ablation = Ablation(),
) -> np.ndarray:
    return softmax(instance_logits(model, cands, ablation)).data.copy()


def instance_loss(
    model: SketchModel,
    cands: Sequence[CandidateInput],
    gold: int,
    ablation: Ablation = Ablation(),
) -> Tensor:
    if not 0 <= gold < len(cands):
        raise ValueError(f"gold index {gold} out of range")
    return -log_softmax(instance_logits(model, cands, ablation)).pick(gold)


def batch_loss(
    model: SketchModel,
    batch: Sequence[tuple[Sequence[CandidateInput], int]],
    ablation: Ablation = Ablation(),
) -> Tensor:
    if not batch:
        raise ValueError("batch must be nonempty")
    losses = [instance_loss(model, cands, gold, ablation) for cands, gold in batch]
    return add_n(losses) / len(losses)


# -- checkpoints --------------------------------------------------------------

_CKPT_FORMAT = "seekqa-checkpoint"
_CKPT_VERSION = 1


def save_checkpoint(model: SketchModel, out: IO[bytes]) -> None:
    """One JSON header line, then each tensor as little-endian float64 bytes."""
    named = model.named_parameters()
    header = {
        "format": _CKPT_FORMAT,
        "version": _CKPT_VERSION,
        "dims": {
            "d_h": model.dims.d_h,
            "d_g": model.dims.d_g,
            "d_r": model.dims.d_r,
            "d_att": model.dims.d_att,
            "d_gru": model.dims.d_gru,
            "d_k": model.dims.d_k,
            "gat_layers": model.dims.gat_layers,
        },
        "seed": model.seed,
        "train_relations": model.train_relations,
        "tensors": [[name, list(t.data.shape)] for name, t in named],
    }
    out.write((json.dumps(header) + "\n").encode("utf-8"))
    for _, t in named:
        out.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load_checkpoint(reader: IO[bytes]) -> SketchModel:
    line = reader.readline()
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"checkpoint header is not valid JSON: {exc}") from None
    if header.get("format") != _CKPT_FORMAT:
        raise DataError("not a model checkpoint (bad format tag)")
    if header.get("version") != _CKPT_VERSION:
        raise DataError(f"unsupported checkpoint version {header.get('version')!r}")
    try:
        dims = ModelDims(**header["dims"])
        seed = int(header["seed"])
        train_relations = bool(header["train_relations"])
        listed = [(str(name), tuple(int(s) for s in shape)) for name, shape in header["tensors"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed checkpoint header: {exc}") from None

    rel_shape = dict(listed).get("rel_emb")
    if rel_shape is None or len(rel_shape) != 2:
        raise DataError("checkpoint is missing the relation table")
    model = init_model(
        dims,
        np.zeros(rel_shape),
        seed=seed,
        train_relations=train_relations,
        zero=True,
    )
    named = model.named_parameters()
    expected = [(name, t.data.shape) for name, t in named]
    if [(n, tuple(s)) for n, s in expected] != listed:
        raise DataError("checkpoint tensor list does not match the stated dims")
    for name, t in named:
        nbytes = t.data.size * 8
        raw = reader.read(nbytes)
        if len(raw) != nbytes:
            raise DataError(f"checkpoint truncated in tensor {name!r}")
        t.data = np.frombuffer(raw, dtype="<f8").reshape(t.data.shape).copy()
        t.zero_grad()
    if reader.read(1):
        raise DataError("checkpoint has trailing bytes after the last tensor")
    return model
