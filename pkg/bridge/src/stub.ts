// Deterministic stub backend: template captions and a hashed bag-of-tokens
// embedder that matches the engine's mock embedder bit-for-bit in spirit
// (same tokenization, FNV-1a 32-bit hash, dimension, and L2 normalization).

export const EMBED_DIM = 256;

const FNV_OFFSET = 0x811c9dc5; // 2166136261
const FNV_PRIME = 16777619;

// Instruction sentence -> granularity keyword used in the caption template.
const INSTRUCTION_KEYWORDS: Record<string, string> = {
  'Describe the action of the person in the video.': 'action',
  'Where does this video take place?': 'place',
  'What are the people in the video wearing?': 'dressing',
  "illustrate the person's emotion or facial expression.": 'emotion',
  'Describe the interaction of person and other people or things.': 'interaction',
};

export function tokenize(text: string): string[] {
  return text.toLowerCase().split(/[^0-9a-z]+/).filter(Boolean);
}

export function fnv1a(token: string): number {
  let hash = FNV_OFFSET;
  for (const byte of Buffer.from(token, 'utf8')) {
    hash ^= byte;
    hash = Math.imul(hash, FNV_PRIME) >>> 0;
  }
  return hash >>> 0;
}

export function embedText(text: string): number[] {
  const counts = new Array<number>(EMBED_DIM).fill(0);
  for (const token of tokenize(text)) {
    counts[fnv1a(token) % EMBED_DIM] += 1;
  }
  const norm = Math.sqrt(counts.reduce((acc, c) => acc + c * c, 0));
  return norm > 0 ? counts.map((c) => c / norm) : counts;
}

export function stubCaption(
  videoId: string,
  start: number,
  end: number,
  instruction: string,
): string {
  const keyword = INSTRUCTION_KEYWORDS[instruction] ?? 'generic';
  return `STUB ${keyword} ${videoId} ${start.toFixed(1)}-${end.toFixed(1)}`;
}
