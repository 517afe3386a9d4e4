//! Weighted isotonic projections of step functions.
//!
//! L2 projection by the pool-adjacent-violators algorithm, L1 projection by
//! weighted-median pooling, and the greatest-convex-minorant left-derivative
//! characterization as an independent route to the L2 solution.

use crate::data::Partition;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Piecewise-constant function on [0,1]: one height per partition bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub partition: Partition,
    pub heights: Vec<f64>,
}

impl StepFunction {
    pub fn new(partition: Partition, heights: Vec<f64>) -> Result<Self> {
        if heights.len() != partition.num_bins() {
            return Err(Error::LengthMismatch {
                expected: partition.num_bins(),
                got: heights.len(),
            });
        }
        Ok(StepFunction { partition, heights })
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.heights[self.partition.bin_index(x)]
    }

    pub fn is_monotone(&self) -> bool {
        self.heights.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Nonnegative per-bin weights with positive total mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    w: Vec<f64>,
}

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "weights must be nonnegative and finite".into(),
            ));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidArgument(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(WeightVector { w })
    }

    pub fn uniform(len: usize) -> Self {
        WeightVector {
            w: vec![1.0 / len as f64; len],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Metric for the monotone projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectionMetric {
    L1,
    L2,
}

/// Weighted L2 isotonic regression: minimizes Σ w_j (v_j − u_j)² over
/// nondecreasing u.
///
/// Stack-based single pass, O(J). Zero-weight entries carry no cost; they are
/// pooled into the enclosing block so the output stays monotone.
pub fn pava_l2(values: &[f64], weights: &WeightVector) -> Result<Vec<f64>> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: values.len(),
            got: weights.len(),
        });
    }
    let w = weights.as_slice();

    // (block mean, block weight, block length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &wj) in values.iter().zip(w) {
        // A zero-weight entry contributes nothing to the block mean.
        let mut mean = v;
        let mut weight = wj;
        let mut len = 1usize;
        while let Some(&(pm, pw, pl)) = blocks.last() {
            // Merge when ordering is violated. Zero-weight blocks are
            // order-free and merge unconditionally into their neighbor.
            let violates = block_mean_or(pm, pw) > block_mean_or(mean, weight)
                || pw == 0.0
                || weight == 0.0;
            if !violates {
                break;
            }
            blocks.pop();
            let tot = pw + weight;
            mean = if tot > 0.0 {
                (pm * pw + mean * weight) / tot
            } else {
                // both weightless; keep the left mean for determinism
                pm
            };
            weight = tot;
            len += pl;
        }
        blocks.push((mean, weight, len));
    }

    let mut out = Vec::with_capacity(values.len());
    for &(mean, _, len) in &blocks {
        out.extend(std::iter::repeat_n(mean, len));
    }
    Ok(out)
}

fn block_mean_or(mean: f64, weight: f64) -> f64 {
    if weight > 0.0 {
        mean
    } else {
        f64::NEG_INFINITY // weightless blocks never block a merge on their own
    }
}

/// Lower weighted median: smallest v with Σ{w_i : x_i <= v} >= Σw/2.
fn lower_weighted_median(pairs: &mut [(f64, f64)]) -> f64 {
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    if total <= 0.0 {
        // all weightless; smallest value keeps the choice deterministic
        return pairs[0].0;
    }
    let half = total / 2.0;
    let mut acc = 0.0;
    for &(v, w) in pairs.iter() {
        acc += w;
        if acc >= half - 1e-15 * total {
            return v;
        }
    }
    pairs.last().unwrap().0
}

/// Weighted L1 isotonic regression: a minimizer of Σ w_j |v_j − u_j| over
/// nondecreasing u, using the lower-weighted-median convention per block.
pub fn isotonic_l1(values: &[f64], weights: &WeightVector) -> Result<Vec<f64>> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: values.len(),
            got: weights.len(),
        });
    }
    let w = weights.as_slice();

    // Blocks keep their member (value, weight) pairs so medians can be
    // recomputed on merge.
    struct Block {
        members: Vec<(f64, f64)>,
        median: f64,
    }
    let mut blocks: Vec<Block> = Vec::new();
    for (&v, &wj) in values.iter().zip(w) {
        let mut members = vec![(v, wj)];
        let mut median = v;
        while let Some(prev) = blocks.last() {
            let prev_free = prev.members.iter().map(|p| p.1).sum::<f64>() == 0.0;
            let cur_free = members.iter().map(|p| p.1).sum::<f64>() == 0.0;
            if prev.median <= median && !prev_free && !cur_free {
                break;
            }
            let mut prev = blocks.pop().unwrap();
            prev.members.append(&mut members);
            members = prev.members;
            median = lower_weighted_median(&mut members);
        }
        blocks.push(Block { members, median });
    }

    let mut out = Vec::with_capacity(values.len());
    for b in &blocks {
        out.extend(std::iter::repeat_n(b.median, b.members.len()));
    }
    Ok(out)
}

/// Left-derivatives of the greatest convex minorant of a cumulative-sum
/// diagram, evaluated at each abscissa after the origin.
///
/// When the points are the weighted cumulative sums of (values, weights),
/// the slopes equal the weighted L2 isotonic regression.
pub fn gcm_left_derivative(points: &[(f64, f64)]) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two cumulative-sum points".into(),
        ));
    }
    if points[0] != (0.0, 0.0) {
        return Err(Error::InvalidArgument(
            "cumulative-sum diagram must start at (0,0)".into(),
        ));
    }
    if points.windows(2).any(|p| p[0].0 >= p[1].0) {
        return Err(Error::InvalidArgument(
            "abscissas must be strictly increasing".into(),
        ));
    }

    // Lower convex hull via a monotone-chain scan.
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b if it lies on or above chord a--p
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    // Left-derivative at each abscissa x_j (j >= 1) is the slope of the hull
    // segment whose right endpoint is the first hull vertex at or past x_j.
    let mut slopes = Vec::with_capacity(points.len() - 1);
    let mut seg = 0usize;
    for &(x, _) in &points[1..] {
        while hull[seg + 1].0 < x {
            seg += 1;
        }
        let (x0, y0) = hull[seg];
        let (x1, y1) = hull[seg + 1];
        slopes.push((y1 - y0) / (x1 - x0));
    }
    Ok(slopes)
}

/// Monotone projection of a step function under per-bin weights.
pub fn project(
    f: &StepFunction,
    weights: &WeightVector,
    metric: ProjectionMetric,
) -> Result<StepFunction> {
    let heights = match metric {
        ProjectionMetric::L2 => pava_l2(&f.heights, weights)?,
        ProjectionMetric::L1 => isotonic_l1(&f.heights, weights)?,
    };
    StepFunction::new(f.partition.clone(), heights)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn wv(w: &[f64]) -> WeightVector {
        WeightVector::new(w.to_vec()).unwrap()
    }

    #[test]
    fn pava_already_monotone() {
        let out = pava_l2(&[1.0, 2.0, 3.0], &wv(&[2.0, 1.0, 0.5])).unwrap();
        assert_eq!(out, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn pava_two_point_pool() {
        let out = pava_l2(&[2.0, 1.0], &wv(&[1.0, 1.0])).unwrap();
        assert_eq!(out, vec![1.5, 1.5]);
    }

    #[test]
    fn pava_weighted_block() {
        let out = pava_l2(&[3.0, 1.0, 2.0], &wv(&[1.0, 2.0, 1.0])).unwrap();
        assert_abs_diff_eq!(out[0], 5.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 5.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[2], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn pava_length_mismatch() {
        assert!(pava_l2(&[1.0], &wv(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn l1_singleton() {
        let out = isotonic_l1(&[5.0], &wv(&[1.0])).unwrap();
        assert_eq!(out, vec![5.0]);
    }

    #[test]
    fn l1_lower_median_block() {
        let out = isotonic_l1(&[3.0, 1.0, 2.0], &wv(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(out, vec![1.0, 1.0, 2.0]);
        let cost: f64 = [3.0, 1.0, 2.0]
            .iter()
            .zip(&out)
            .map(|(v, u)| (v - u).abs())
            .sum();
        assert_abs_diff_eq!(cost, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn l1_monotone_unchanged() {
        let vals = [0.5, 0.5, 1.0, 4.0];
        let out = isotonic_l1(&vals, &wv(&[1.0, 2.0, 1.0, 1.0])).unwrap();
        assert_eq!(out, vals.to_vec());
    }

    #[test]
    fn gcm_chord() {
        let slopes = gcm_left_derivative(&[(0.0, 0.0), (1.0, 2.0), (2.0, 2.0)]).unwrap();
        assert_abs_diff_eq!(slopes[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(slopes[1], 1.0, epsilon = 1e-12);
        // matches pava on the generating values
        let pava = pava_l2(&[2.0, 0.0], &wv(&[1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(slopes[0], pava[0], epsilon = 1e-12);
    }

    #[test]
    fn gcm_convex_input_is_identity() {
        let pts = [(0.0, 0.0), (1.0, -1.0), (2.0, -1.5), (3.0, 0.0)];
        let slopes = gcm_left_derivative(&pts).unwrap();
        assert_abs_diff_eq!(slopes[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(slopes[1], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(slopes[2], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn gcm_linear() {
        let slopes = gcm_left_derivative(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert_eq!(slopes, vec![1.0, 1.0]);
    }

    #[test]
    fn gcm_rejects_bad_abscissas() {
        assert!(gcm_left_derivative(&[(0.0, 0.0), (1.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(gcm_left_derivative(&[(0.5, 0.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn project_monotone_fixed_point() {
        let p = Partition::equispaced(3).unwrap();
        let f = StepFunction::new(p, vec![0.0, 1.0, 2.0]).unwrap();
        let w = wv(&[1.0, 1.0, 1.0]);
        for metric in [ProjectionMetric::L1, ProjectionMetric::L2] {
            let g = project(&f, &w, metric).unwrap();
            assert_eq!(g.heights, f.heights);
        }
    }

    #[test]
    fn zero_weight_bins_pooled() {
        // middle bin weightless: its value is free, output must be monotone
        let out = pava_l2(&[0.0, 9.0, 1.0], &wv(&[1.0, 0.0, 1.0])).unwrap();
        assert!(out.windows(2).all(|w| w[0] <= w[1]), "{out:?}");
        // positive-weight bins keep their values: the objective is zero
        assert_abs_diff_eq!(out[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[2], 1.0, epsilon = 1e-12);
    }

    // --- exhaustive enumeration oracle -------------------------------------

    /// All isotonic solutions are constant on contiguous blocks; enumerate
    /// every composition of the index range into blocks, assign each block
    /// its weighted mean (L2) or lower weighted median (L1), keep the
    /// feasible assignment with the lowest objective.
    pub(crate) fn oracle(values: &[f64], weights: &[f64], l2: bool) -> (Vec<f64>, f64) {
        let n = values.len();
        let mut best: Option<(Vec<f64>, f64)> = None;
        // bitmask over n-1 possible block boundaries
        for mask in 0..(1u32 << (n - 1)) {
            let mut sol = Vec::with_capacity(n);
            let mut start = 0usize;
            for end in 0..n {
                let boundary = end == n - 1 || (mask >> end) & 1 == 1;
                if boundary {
                    let block: Vec<usize> = (start..=end).collect();
                    let val = if l2 {
                        let sw: f64 = block.iter().map(|&i| weights[i]).sum();
                        if sw > 0.0 {
                            block.iter().map(|&i| weights[i] * values[i]).sum::<f64>() / sw
                        } else {
                            values[start]
                        }
                    } else {
                        let mut pairs: Vec<(f64, f64)> =
                            block.iter().map(|&i| (values[i], weights[i])).collect();
                        lower_weighted_median(&mut pairs)
                    };
                    sol.extend(std::iter::repeat_n(val, block.len()));
                    start = end + 1;
                }
            }
            if sol.windows(2).any(|w| w[0] > w[1] + 1e-12) {
                continue;
            }
            let obj: f64 = values
                .iter()
                .zip(weights)
                .zip(&sol)
                .map(|((v, w), u)| {
                    if l2 {
                        w * (v - u) * (v - u)
                    } else {
                        w * (v - u).abs()
                    }
                })
                .sum();
            if best.as_ref().is_none_or(|(_, b)| obj < *b) {
                best = Some((sol, obj));
            }
        }
        best.unwrap()
    }

    #[test]
    fn oracle_agrees_on_spec_cases() {
        let (sol, _) = oracle(&[3.0, 1.0, 2.0], &[1.0, 2.0, 1.0], true);
        assert_abs_diff_eq!(sol[0], 5.0 / 3.0, epsilon = 1e-12);
        let (_, obj) = oracle(&[3.0, 1.0, 2.0], &[1.0, 1.0, 1.0], false);
        assert_abs_diff_eq!(obj, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn random_instances_match_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::master_rng(5150);
        for _ in 0..200 {
            let j = rng.gen_range(1..=8usize);
            let values: Vec<f64> = (0..j).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let weights: Vec<f64> = (0..j).map(|_| rng.gen_range(0.5..3.0)).collect();
            let w = wv(&weights);

            let (osol, _) = oracle(&values, &weights, true);
            let pava = pava_l2(&values, &w).unwrap();
            for (a, b) in pava.iter().zip(&osol) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }

            let (_, oobj) = oracle(&values, &weights, false);
            let l1 = isotonic_l1(&values, &w).unwrap();
            let obj: f64 = values
                .iter()
                .zip(&weights)
                .zip(&l1)
                .map(|((v, wt), u)| wt * (v - u).abs())
                .sum();
            assert_abs_diff_eq!(obj, oobj, epsilon = 1e-10);
        }
    }

    #[test]
    fn gcm_equals_pava_on_cumsum_diagram() {
        use rand::Rng;
        let mut rng = crate::rng::master_rng(88);
        for _ in 0..200 {
            let j = rng.gen_range(1..=10usize);
            let values: Vec<f64> = (0..j).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let weights: Vec<f64> = (0..j).map(|_| rng.gen_range(0.5..3.0)).collect();
            let n: f64 = weights.iter().sum();
            let mut pts = vec![(0.0, 0.0)];
            let (mut cx, mut cy) = (0.0, 0.0);
            for (v, w) in values.iter().zip(&weights) {
                cx += w / n;
                cy += w * v / n;
                pts.push((cx, cy));
            }
            let slopes = gcm_left_derivative(&pts).unwrap();
            let pava = pava_l2(&values, &wv(&weights)).unwrap();
            for (a, b) in slopes.iter().zip(&pava) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn pava_output_monotone_and_idempotent(
            values in proptest::collection::vec(-5.0f64..5.0, 1..20),
            seed in 0u64..1000,
        ) {
            use rand::Rng;
            let mut rng = crate::rng::master_rng(seed);
            let weights: Vec<f64> = (0..values.len()).map(|_| rng.gen_range(0.1..2.0)).collect();
            let w = wv(&weights);
            let out = pava_l2(&values, &w).unwrap();
            prop_assert!(out.windows(2).all(|p| p[0] <= p[1]));
            let again = pava_l2(&out, &w).unwrap();
            for (a, b) in out.iter().zip(&again) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn l1_output_monotone_and_idempotent(
            values in proptest::collection::vec(-5.0f64..5.0, 1..20),
            seed in 0u64..1000,
        ) {
            use rand::Rng;
            let mut rng = crate::rng::master_rng(seed);
            let weights: Vec<f64> = (0..values.len()).map(|_| rng.gen_range(0.1..2.0)).collect();
            let w = wv(&weights);
            let out = isotonic_l1(&values, &w).unwrap();
            prop_assert!(out.windows(2).all(|p| p[0] <= p[1]));
            let again = isotonic_l1(&out, &w).unwrap();
            for (a, b) in out.iter().zip(&again) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn projection_beats_any_monotone_competitor(
            values in proptest::collection::vec(-3.0f64..3.0, 2..10),
            seed in 0u64..200,
        ) {
            use rand::Rng;
            let mut rng = crate::rng::master_rng(seed);
            let j = values.len();
            let weights: Vec<f64> = (0..j).map(|_| rng.gen_range(0.2..2.0)).collect();
            let w = wv(&weights);
            let l2 = pava_l2(&values, &w).unwrap();
            let l1 = isotonic_l1(&values, &w).unwrap();
            for _ in 0..100 {
                // random monotone competitor
                let mut h: Vec<f64> = (0..j).map(|_| rng.gen_range(-4.0..4.0)).collect();
                h.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let d2 = |u: &[f64]| -> f64 {
                    values.iter().zip(&weights).zip(u)
                        .map(|((v, wt), s)| wt * (v - s) * (v - s)).sum()
                };
                let d1 = |u: &[f64]| -> f64 {
                    values.iter().zip(&weights).zip(u)
                        .map(|((v, wt), s)| wt * (v - s).abs()).sum()
                };
                prop_assert!(d2(&l2) <= d2(&h) + 1e-10);
                prop_assert!(d1(&l1) <= d1(&h) + 1e-10);
            }
        }
    }

    #[test]
    fn pava_pooled_blocks_are_weighted_means() {
        use rand::Rng;
        let mut rng = crate::rng::master_rng(31);
        for _ in 0..100 {
            let j = rng.gen_range(2..=10usize);
            let values: Vec<f64> = (0..j).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let weights: Vec<f64> = (0..j).map(|_| rng.gen_range(0.3..2.0)).collect();
            let out = pava_l2(&values, &wv(&weights)).unwrap();
            // walk the constant blocks and check the weighted-mean property
            let mut i = 0;
            while i < j {
                let mut k = i;
                while k + 1 < j && out[k + 1] == out[i] {
                    k += 1;
                }
                let sw: f64 = weights[i..=k].iter().sum();
                let sv: f64 = values[i..=k]
                    .iter()
                    .zip(&weights[i..=k])
                    .map(|(v, w)| v * w)
                    .sum();
                assert_abs_diff_eq!(out[i], sv / sw, epsilon = 1e-10);
                i = k + 1;
            }
        }
    }
}
