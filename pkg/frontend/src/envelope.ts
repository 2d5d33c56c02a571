// Min/max-envelope decimation: one (lo, hi) pair per pixel column, so brief
// slow-wave peaks stay visible no matter how many samples share a column.

export function minMaxEnvelope(
  samples: ArrayLike<number>,
  columns: number,
): Array<[number, number]> {
  const n = samples.length;
  const out: Array<[number, number]> = [];
  if (n === 0 || columns <= 0) return out;
  for (let c = 0; c < columns; c++) {
    const a = Math.floor((c * n) / columns);
    const b = Math.max(a + 1, Math.floor(((c + 1) * n) / columns));
    let lo = samples[a];
    let hi = samples[a];
    for (let i = a + 1; i < b && i < n; i++) {
      const v = samples[i];
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
    out.push([lo, hi]);
  }
  return out;
}
