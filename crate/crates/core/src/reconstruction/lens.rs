//! Lens relation recovered from data alone: the two ends of a chord are the
//! exit samples with matching Σ-sets. Full sets pair direction k with
//! k + grid/2; sets thinned by deduplication fall back to a Σ vote.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::data::{sample_distance, sigma_set_indexed, Dataset, SampleIndex};
use crate::domain::Manifold;
use crate::error::{Error, Result};
use crate::flow::{entry_vector, exit_angle, scattering_relation, LensData, LensEntry};

#[derive(Debug, Clone, PartialEq)]
pub struct LensExtraction {
    pub lens: LensData,
    /// `(set index, sample index)` of each entry's exit sample.
    pub sources: Vec<(usize, usize)>,
    /// Exit samples without a partner: `(set id, sample index)`.
    pub orphans: Vec<(String, usize)>,
}

fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    common as f64 / (a.len() + b.len() - common).max(1) as f64
}

/// Pairs each non-tangential exit sample `(q, ξ)` with the other end
/// `(p, η)` of its chord, giving `L(p, −η) = (q, ξ)`. Tangential samples
/// are fixed points. Travel times are unknown from data and left empty.
pub fn extract_lens_data(ds: &Dataset, eps: Option<f64>) -> Result<LensExtraction> {
    if !ds.is_complete() {
        return Err(Error::Usage("lens extraction needs complete scattering sets; lift the dataset first".into()));
    }
    if ds.dim != 2 {
        return Err(Error::UnsupportedDimension(ds.dim));
    }
    let eps = eps.unwrap_or_else(|| ds.eps_match());
    let len = ds.boundary_len;
    let index = SampleIndex::new(ds, eps);
    let flat: Vec<(usize, usize)> =
        ds.sets.iter().enumerate().flat_map(|(i, s)| (0..s.samples.len()).map(move |j| (i, j))).collect();
    let sigmas: Vec<Vec<usize>> =
        flat.par_iter().map(|&(i, j)| sigma_set_indexed(ds, &index, &ds.sets[i].samples[j], eps)).collect();
    let offset: Vec<usize> = ds
        .sets
        .iter()
        .scan(0usize, |acc, s| {
            let o = *acc;
            *acc += s.samples.len();
            Some(o)
        })
        .collect();
    // (set i, source j) → samples of i whose Σ contains j
    let mut through: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (k, &(i, jj)) in flat.iter().enumerate() {
        for &src in &sigmas[k] {
            if src != i {
                through.entry((i, src)).or_default().push(jj);
            }
        }
    }
    let results: Vec<Option<LensEntry>> = flat
        .par_iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let a = &ds.sets[i].samples[j];
            let (sa, aa) = (a.s, a.angle());
            if a.is_tangential() {
                return Some(LensEntry { s_in: a.s, angle_in: aa, s_out: a.s, angle_out: aa, time: None });
            }
            let sig = &sigmas[k];
            let n = ds.sets[i].samples.len();
            if n == ds.grid {
                // samples are stored by direction, so k + n/2 is the reverse direction
                let c = (j + n / 2) % n;
                let b = &ds.sets[i].samples[c];
                let sb = &sigmas[offset[i] + c];
                if b.is_tangential() || !sig.iter().any(|s| *s != i && sb.binary_search(s).is_ok()) {
                    return None;
                }
                return Some(LensEntry { s_in: b.s, angle_in: -b.angle(), s_out: sa, angle_out: aa, time: None });
            }
            // Vote among samples of the own set for the far end of the chord.
            // A co-linear source seen from many directions of the own source
            // lies close to it and says little about the chord, so it is
            // weighted by the inverse of that count.
            let mut score: HashMap<usize, f64> = HashMap::new();
            for &src in sig.iter().filter(|&&s| s != i) {
                let Some(list) = through.get(&(i, src)) else { continue };
                let w = 1.0 / list.len() as f64;
                for &c in list {
                    let b = &ds.sets[i].samples[c];
                    if b.is_tangential() || sample_distance(len, sa, aa, b.s, b.angle()) <= 2.0 * eps {
                        continue;
                    }
                    *score.entry(c).or_insert(0.0) += w;
                }
            }
            let mut ranked: Vec<(f64, f64, usize)> =
                score.into_iter().map(|(c, w)| (w, jaccard(sig, &sigmas[offset[i] + c]), c)).collect();
            ranked.sort_by(|x, y| y.0.total_cmp(&x.0).then(y.1.total_cmp(&x.1)).then(x.2.cmp(&y.2)));
            if ranked.is_empty() {
                return None;
            }
            // the far end is seen by the chord's sources as tightly as the near end
            let others: Vec<usize> = sig.iter().copied().filter(|&s| s != i).collect();
            let weight = |src: usize| 1.0 / through.get(&(i, src)).map_or(1, |l| l.len()) as f64;
            let penalty = |c: usize| {
                let b = &ds.sets[i].samples[c];
                let (sb, ab) = (b.s, b.angle());
                let mut near: HashMap<usize, f64> = HashMap::new();
                for (set, smp) in index.query(ds, sb, ab, eps) {
                    let o = &ds.sets[set].samples[smp];
                    let d = sample_distance(len, sb, ab, o.s, o.angle());
                    let e = near.entry(set).or_insert(f64::INFINITY);
                    *e = e.min(d);
                }
                others.iter().map(|&src| weight(src) * near.get(&src).copied().unwrap_or(eps).min(eps)).sum::<f64>()
            };
            let c = ranked
                .iter()
                .take(6)
                .map(|r| (penalty(r.2), r.2))
                .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
                .map(|x| x.1)?;
            let b = &ds.sets[i].samples[c];
            Some(LensEntry { s_in: b.s, angle_in: -b.angle(), s_out: sa, angle_out: aa, time: None })
        })
        .collect();
    let mut lens = LensData::default();
    let mut sources = Vec::new();
    let mut orphans = Vec::new();
    for (r, &(i, j)) in results.into_iter().zip(&flat) {
        match r {
            Some(e) => {
                lens.entries.push(e);
                sources.push((i, j));
            }
            None => orphans.push((ds.sets[i].id.clone(), j)),
        }
    }
    Ok(LensExtraction { lens, sources, orphans })
}

/// Counts `(agreeing, checked)` extracted entries against the forward
/// scattering relation of `m`, within `eps` in sample distance.
/// Tangential fixed points are not checked.
pub fn agreement_with_model(m: &Manifold, ex: &LensExtraction, eps: f64) -> Result<(usize, usize)> {
    let len = m.boundary_len()?;
    let rows: Vec<Option<bool>> = ex
        .lens
        .entries
        .par_iter()
        .map(|e| {
            if e.angle_out.abs() >= FRAC_PI_2 - 1e-6 {
                return Ok(None);
            }
            let (x, xi) = entry_vector(m, e.s_in, e.angle_in)?;
            let r = scattering_relation(m, &x, &xi)?;
            let s = r.s_exit.ok_or(Error::UnsupportedDimension(m.dim()))?;
            let d = sample_distance(len, s, exit_angle(m, &r.x_exit, &r.v_exit), e.s_out, e.angle_out);
            Ok(Some(d <= eps))
        })
        .collect::<Result<_>>()?;
    let checked = rows.iter().flatten().count();
    Ok((rows.iter().flatten().filter(|b| **b).count(), checked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::data::{assign_ids, generate_dataset, random_points};

    #[test]
    fn matches_forward_relation_on_flat_disk() {
        let m = bundled::flat_disk();
        let ds = generate_dataset(&m, &assign_ids(random_points(&m, 120, 0.0, 9), true, 1), 180, true).unwrap();
        let ex = extract_lens_data(&ds, None).unwrap();
        let eps = ds.eps_match();
        let mut ok = 0;
        let mut total = 0;
        for e in ex.lens.entries.iter().step_by(7) {
            if e.angle_out.abs() > 1.5707 {
                continue;
            }
            total += 1;
            let (x, xi) = entry_vector(&m, e.s_in, e.angle_in).unwrap();
            let r = scattering_relation(&m, &x, &xi).unwrap();
            let d = sample_distance(ds.boundary_len, r.s_exit.unwrap(), exit_angle(&m, &r.x_exit, &r.v_exit), e.s_out, e.angle_out);
            if d <= eps {
                ok += 1;
            }
        }
        assert!(ok as f64 >= 0.99 * total as f64, "{ok}/{total}");
        assert!(ex.orphans.len() * 20 < ex.lens.entries.len());
    }

    #[test]
    fn single_source_is_mostly_orphans() {
        let m = bundled::flat_disk();
        let ds = generate_dataset(&m, &assign_ids(vec![vec![0.2, 0.1]], false, 0), 64, true).unwrap();
        let ex = extract_lens_data(&ds, None).unwrap();
        assert_eq!(ex.orphans.len(), 64);
    }

    #[test]
    fn tangential_samples_are_fixed() {
        let m = bundled::flat_disk();
        let p = m.boundary_point(2.0).unwrap();
        let ds = generate_dataset(&m, &assign_ids(vec![p], false, 0), 64, true).unwrap();
        let ex = extract_lens_data(&ds, None).unwrap();
        let fixed: Vec<_> = ex.lens.entries.iter().filter(|e| e.s_in == e.s_out).collect();
        assert!(!fixed.is_empty());
        for e in fixed {
            assert!((e.s_in - 2.0).abs() < 1e-9 && e.angle_in == e.angle_out);
        }
    }
}
