/**
 * Seeded randomness. Everything stochastic in the worker (weight init via
 * the patched global, shuffling, augmentation, subset selection) must draw
 * from here so a fixed request seed reproduces the run exactly on CPU.
 */

export type Rng = () => number;

export function mulberry32(seed: number): Rng {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Derive an independent stream from a base seed and a stream tag. */
export function derive(seed: number, tag: number): Rng {
  return mulberry32((seed ^ Math.imul(tag, 0x9e3779b1)) >>> 0);
}

/** In-place Fisher-Yates shuffle. */
export function shuffle<T>(items: T[], rng: Rng): T[] {
  for (let i = items.length - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1));
    [items[i], items[j]] = [items[j], items[i]];
  }
  return items;
}

/**
 * Replace Math.random with a seeded stream. The ML runtime derives its
 * internal PRNG seeds from Math.random when layers carry no explicit seed,
 * so patching the global makes unseeded candidate code reproducible too.
 */
export function patchGlobalRandom(seed: number): void {
  const rng = mulberry32((seed ^ 0x5eedbeef) >>> 0);
  Math.random = rng;
}
