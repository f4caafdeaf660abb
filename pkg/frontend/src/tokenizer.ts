/**
 * Word and subword tokenization for the encoding exporter.
 *
 * Word tokens must match the consumer side exactly: lowercased runs of
 * ASCII letters and digits, punctuation discarded. Subword pieces exist
 * only inside this package; every exported vector is pooled back to the
 * word level before it leaves.
 */

export const CLS_TOKEN = "[CLS]";
export const SEP_TOKEN = "[SEP]";

const WORD_RE = /[a-z0-9]+/g;

/** Lowercased alphanumeric tokens, identical to the consumer's tokenizer. */
export function wordTokenize(text: string): string[] {
  return text.toLowerCase().match(WORD_RE) ?? [];
}

/** Longest piece the subword splitter emits (excluding the "##" marker). */
export const MAX_PIECE_CHARS = 4;

/**
 * Deterministic subword split: the first piece takes up to four characters,
 * continuation pieces are prefixed "##". Joining the pieces and stripping
 * the markers always reproduces the word.
 */
export function subwordPieces(word: string): string[] {
  if (word.length === 0) {
    throw new Error("cannot split an empty word");
  }
  const pieces: string[] = [word.slice(0, MAX_PIECE_CHARS)];
  for (let i = MAX_PIECE_CHARS; i < word.length; i += MAX_PIECE_CHARS) {
    pieces.push("##" + word.slice(i, i + MAX_PIECE_CHARS));
  }
  return pieces;
}

export interface AlignedSequence {
  /** Subword pieces including [CLS], the middle [SEP], and the final [SEP]. */
  pieces: string[];
  /** Word-level tokens: question words, [SEP], answer words. */
  words: string[];
  /** Half-open piece index range [start, end) per word, aligned to `words`. */
  spans: Array<[number, number]>;
}

/**
 * Build the [CLS] question [SEP] answer [SEP] piece sequence together with
 * the word-to-piece alignment. The exported record keeps the word sequence;
 * [CLS] and the trailing [SEP] feed only the global vector and never appear
 * as words.
 */
export function alignPair(question: string, answer: string): AlignedSequence {
  const qWords = wordTokenize(question);
  const aWords = wordTokenize(answer);
  const pieces: string[] = [CLS_TOKEN];
  const words: string[] = [];
  const spans: Array<[number, number]> = [];

  const pushWord = (w: string) => {
    const start = pieces.length;
    for (const p of subwordPieces(w)) pieces.push(p);
    words.push(w);
    spans.push([start, pieces.length]);
  };

  for (const w of qWords) pushWord(w);
  words.push(SEP_TOKEN);
  spans.push([pieces.length, pieces.length + 1]);
  pieces.push(SEP_TOKEN);
  for (const w of aWords) pushWord(w);
  pieces.push(SEP_TOKEN);
  return { pieces, words, spans };
}
