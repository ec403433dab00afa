//! Binned empirical measures on axis-aligned boxes.

use std::collections::BTreeMap;

/// L1 distance between the normalized histograms of two point clouds over a
/// uniform `bins^d` partition of the box `[lo, hi]`.
///
/// Points outside the box are clamped into the boundary cells. Cells are
/// visited in sorted order so the sum is reproducible bit for bit.
pub(crate) fn histogram_l1(
    before: &[Vec<f64>],
    after: &[Vec<f64>],
    lo: &[f64],
    hi: &[f64],
    bins: usize,
) -> f64 {
    let mut cells: BTreeMap<Vec<usize>, (u64, u64)> = BTreeMap::new();
    for p in before {
        cells.entry(cell_of(p, lo, hi, bins)).or_default().0 += 1;
    }
    for p in after {
        cells.entry(cell_of(p, lo, hi, bins)).or_default().1 += 1;
    }
    let nb = before.len().max(1) as f64;
    let na = after.len().max(1) as f64;
    cells
        .values()
        .map(|&(b, a)| (b as f64 / nb - a as f64 / na).abs())
        .sum()
}

fn cell_of(p: &[f64], lo: &[f64], hi: &[f64], bins: usize) -> Vec<usize> {
    p.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&l, &h))| {
            let width = h - l;
            let u = if width > 0.0 { (v - l) / width } else { 0.0 };
            let idx = (u * bins as f64).floor();
            if idx < 0.0 {
                0
            } else {
                (idx as usize).min(bins - 1)
            }
        })
        .collect()
}

/// Coordinate-wise bounding box of a nonempty point set.
pub(crate) fn bounding_box<'a>(
    points: impl IntoIterator<Item = &'a Vec<f64>>,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut iter = points.into_iter();
    let first = iter.next()?;
    let mut lo = first.clone();
    let mut hi = first.clone();
    for p in iter {
        for ((l, h), &v) in lo.iter_mut().zip(hi.iter_mut()).zip(p) {
            *l = l.min(v);
            *h = h.max(v);
        }
    }
    Some((lo, hi))
}
