//! Data ingestion, interval partitions, and per-bin statistics.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Observed regression sample: predictors in [0,1] paired with responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset, validating lengths and the predictor domain.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        if xs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, &x) in xs.iter().enumerate() {
            if !(0.0..=1.0).contains(&x) || !x.is_finite() {
                return Err(Error::PredictorOutOfRange {
                    line: i + 2, // header is line 1
                    value: x,
                });
            }
        }
        Ok(Dataset { xs, ys })
    }

    pub fn n(&self) -> usize {
        self.xs.len()
    }
}

/// Interval partition of [0,1] with strictly increasing knots 0 = ξ₀ < … < ξ_J = 1.
///
/// Bin membership is left-closed/right-open, with the last bin closed on both
/// sides, so every x in [0,1] belongs to exactly one bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    knots: Vec<f64>,
}

impl Partition {
    /// Builds a partition from interior knots plus the endpoints 0 and 1.
    pub fn from_knots(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidArgument(
                "partition needs at least the two endpoint knots".into(),
            ));
        }
        if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
            return Err(Error::InvalidArgument(
                "partition knots must start at 0 and end at 1".into(),
            ));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "partition knots must be strictly increasing".into(),
            ));
        }
        Ok(Partition { knots })
    }

    /// Equispaced knots ξ_j = j/J.
    pub fn equispaced(j_bins: usize) -> Result<Self> {
        if j_bins == 0 {
            return Err(Error::ZeroBins);
        }
        let knots = (0..=j_bins).map(|j| j as f64 / j_bins as f64).collect();
        Ok(Partition { knots })
    }

    /// Number of bins J.
    pub fn num_bins(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Width ξ_j − ξ_{j-1} of bin `j`.
    pub fn bin_width(&self, j: usize) -> f64 {
        self.knots[j + 1] - self.knots[j]
    }

    /// Index of the bin containing `x`.
    ///
    /// Bins are [ξ_{j-1}, ξ_j) except the last, which is closed.
    pub fn bin_index(&self, x: f64) -> usize {
        debug_assert!((0.0..=1.0).contains(&x));
        match self
            .knots
            .binary_search_by(|k| k.partial_cmp(&x).unwrap())
        {
            Ok(j) => j.min(self.num_bins() - 1),
            Err(j) => j - 1,
        }
    }
}

/// Per-bin counts, response means, and empirical weights N_j/n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub counts: Vec<usize>,
    /// Mean of y over the bin; `None` when the bin is empty.
    pub means: Vec<Option<f64>>,
    /// Empirical measure of each bin, N_j/n.
    pub weights: Vec<f64>,
}

impl BinStats {
    pub fn num_bins(&self) -> usize {
        self.counts.len()
    }
}

/// Loads a dataset from a CSV file with header `x,y`.
///
/// Columns beyond the first two are ignored with a warning on stderr.
pub fn load_dataset<P: AsRef<Path>>(path: P) -> Result<Dataset> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = csv::Reader::from_path(path.as_ref()).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io {
            path: path_str.clone(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
        },
        _ => Error::MalformedRow {
            line: 1,
            message: e.to_string(),
        },
    })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedRow {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.len() > 2 {
        eprintln!(
            "warning: {} has {} columns; only `x` and `y` are used",
            path_str,
            headers.len()
        );
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::MalformedRow {
            line,
            message: e.to_string(),
        })?;
        if record.len() < 2 {
            return Err(Error::MalformedRow {
                line,
                message: "expected at least two columns".into(),
            });
        }
        let x: f64 = record[0].trim().parse().map_err(|_| Error::MalformedRow {
            line,
            message: format!("cannot parse x value {:?}", &record[0]),
        })?;
        let y: f64 = record[1].trim().parse().map_err(|_| Error::MalformedRow {
            line,
            message: format!("cannot parse y value {:?}", &record[1]),
        })?;
        if !(0.0..=1.0).contains(&x) || !x.is_finite() {
            return Err(Error::PredictorOutOfRange { line, value: x });
        }
        xs.push(x);
        ys.push(y);
    }
    if xs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset { xs, ys })
}

/// Draws J−1 knots uniformly without replacement from the distinct interior
/// design values, sorted, with endpoints 0 and 1 appended.
pub fn sample_knots_from_design<R: Rng + ?Sized>(
    xs: &[f64],
    j_bins: usize,
    rng: &mut R,
) -> Result<Partition> {
    if j_bins == 0 {
        return Err(Error::ZeroBins);
    }
    let mut distinct: Vec<f64> = xs
        .iter()
        .copied()
        .filter(|&x| x > 0.0 && x < 1.0)
        .collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let needed = j_bins - 1;
    if distinct.len() < needed {
        return Err(Error::TooFewKnotCandidates {
            needed,
            found: distinct.len(),
        });
    }
    let chosen = rand::seq::index::sample(rng, distinct.len(), needed);
    let mut interior: Vec<f64> = chosen.iter().map(|i| distinct[i]).collect();
    interior.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut knots = Vec::with_capacity(j_bins + 1);
    knots.push(0.0);
    knots.extend(interior);
    knots.push(1.0);
    Partition::from_knots(knots)
}

/// Counts and response means per bin of `part`.
///
/// Empty bins are legal: their count is 0 and the mean is `None`.
pub fn bin_stats(data: &Dataset, part: &Partition) -> BinStats {
    let j_bins = part.num_bins();
    let mut counts = vec![0usize; j_bins];
    let mut sums = vec![0.0f64; j_bins];
    for (&x, &y) in data.xs.iter().zip(&data.ys) {
        let j = part.bin_index(x);
        counts[j] += 1;
        sums[j] += y;
    }
    let n = data.n() as f64;
    let means = counts
        .iter()
        .zip(&sums)
        .map(|(&c, &s)| if c > 0 { Some(s / c as f64) } else { None })
        .collect();
    let weights = counts.iter().map(|&c| c as f64 / n).collect();
    BinStats {
        counts,
        means,
        weights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn write_csv(content: &str) -> tempfile_path::TempCsv {
        tempfile_path::TempCsv::new(content)
    }

    // Minimal temp-file helper so the csv tests do not need a crate dep here.
    mod tempfile_path {
        use std::path::PathBuf;

        pub struct TempCsv {
            pub path: PathBuf,
        }

        impl TempCsv {
            pub fn new(content: &str) -> Self {
                let mut path = std::env::temp_dir();
                path.push(format!(
                    "isoproj_test_{}_{}.csv",
                    std::process::id(),
                    super::NEXT_ID.fetch_add(1, std::sync::atomic::Ordering::Relaxed)
                ));
                std::fs::write(&path, content).unwrap();
                TempCsv { path }
            }
        }

        impl Drop for TempCsv {
            fn drop(&mut self) {
                let _ = std::fs::remove_file(&self.path);
            }
        }
    }

    static NEXT_ID: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);

    #[test]
    fn load_two_rows() {
        let f = write_csv("x,y\n0.1,1.0\n0.6,2.0\n");
        let d = load_dataset(&f.path).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.xs, vec![0.1, 0.6]);
        assert_eq!(d.ys, vec![1.0, 2.0]);
    }

    #[test]
    fn load_empty_data_section() {
        let f = write_csv("x,y\n");
        match load_dataset(&f.path) {
            Err(Error::EmptyDataset) => {}
            other => panic!("expected EmptyDataset, got {other:?}"),
        }
    }

    #[test]
    fn load_x_out_of_domain_names_line() {
        let f = write_csv("x,y\n1.5,0.0\n");
        match load_dataset(&f.path) {
            Err(Error::PredictorOutOfRange { line, value }) => {
                assert_eq!(line, 2);
                assert_eq!(value, 1.5);
            }
            other => panic!("expected PredictorOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn load_malformed_row_names_line() {
        let f = write_csv("x,y\n0.2,1.0\n0.4,abc\n");
        match load_dataset(&f.path) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected MalformedRow, got {other:?}"),
        }
    }

    #[test]
    fn load_missing_file() {
        match load_dataset("/nonexistent/isoproj.csv") {
            Err(Error::Io { path, .. }) => assert!(path.contains("isoproj.csv")),
            other => panic!("expected Io error, got {other:?}"),
        }
    }

    #[test]
    fn extra_columns_ignored() {
        let f = write_csv("x,y,z\n0.5,2.0,9.9\n");
        let d = load_dataset(&f.path).unwrap();
        assert_eq!(d.n(), 1);
        assert_eq!(d.ys, vec![2.0]);
    }

    #[test]
    fn equispaced_partitions() {
        assert_eq!(Partition::equispaced(2).unwrap().knots(), &[0.0, 0.5, 1.0]);
        assert_eq!(Partition::equispaced(1).unwrap().knots(), &[0.0, 1.0]);
        assert_eq!(
            Partition::equispaced(4).unwrap().knots(),
            &[0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert!(matches!(Partition::equispaced(0), Err(Error::ZeroBins)));
    }

    #[test]
    fn bin_index_covers_endpoints() {
        let p = Partition::equispaced(4).unwrap();
        assert_eq!(p.bin_index(0.0), 0);
        assert_eq!(p.bin_index(0.25), 1); // left-closed
        assert_eq!(p.bin_index(1.0), 3); // last bin closed
    }

    #[test]
    fn bin_stats_basic() {
        let d = Dataset::new(vec![0.1, 0.6], vec![1.0, 3.0]).unwrap();
        let p = Partition::equispaced(2).unwrap();
        let s = bin_stats(&d, &p);
        assert_eq!(s.counts, vec![1, 1]);
        assert_eq!(s.means, vec![Some(1.0), Some(3.0)]);
        assert_eq!(s.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn bin_stats_empty_bin() {
        let d = Dataset::new(vec![0.1, 0.2, 0.3], vec![1.0, 2.0, 3.0]).unwrap();
        let p = Partition::equispaced(2).unwrap();
        let s = bin_stats(&d, &p);
        assert_eq!(s.counts, vec![3, 0]);
        assert_eq!(s.means[1], None);
    }

    #[test]
    fn bin_stats_hand_count() {
        let d = Dataset::new(vec![0.25, 0.25, 0.75], vec![1.0, 3.0, 5.0]).unwrap();
        let p = Partition::equispaced(2).unwrap();
        let s = bin_stats(&d, &p);
        assert_eq!(s.counts, vec![2, 1]);
        assert_eq!(s.means, vec![Some(2.0), Some(5.0)]);
    }

    #[test]
    fn knots_single_bin_ignores_xs() {
        let mut rng = crate::rng::master_rng(1);
        let p = sample_knots_from_design(&[0.3, 0.7], 1, &mut rng).unwrap();
        assert_eq!(p.knots(), &[0.0, 1.0]);
    }

    #[test]
    fn knots_too_few_distinct() {
        let mut rng = crate::rng::master_rng(1);
        match sample_knots_from_design(&[0.3], 3, &mut rng) {
            Err(Error::TooFewKnotCandidates { needed, found }) => {
                assert_eq!(needed, 2);
                assert_eq!(found, 1);
            }
            other => panic!("expected TooFewKnotCandidates, got {other:?}"),
        }
    }

    #[test]
    fn knots_uniform_over_candidates_chi_square() {
        // xs = {0.2, 0.5, 0.8}, J = 2: each value should be chosen with
        // probability 1/3. Chi-square with 2 df, 0.999 critical value 13.82.
        let xs = [0.2, 0.5, 0.8];
        let mut rng = crate::rng::master_rng(99);
        let mut counts = [0usize; 3];
        let draws = 3000;
        for _ in 0..draws {
            let p = sample_knots_from_design(&xs, 2, &mut rng).unwrap();
            let k = p.knots()[1];
            let idx = xs.iter().position(|&v| v == k).unwrap();
            counts[idx] += 1;
        }
        let expected = draws as f64 / 3.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 13.82, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn knots_exact_subset_law_small_cases() {
        // Exact enumeration check: with d distinct values and J-1 interior
        // knots, each (J-1)-subset should appear with frequency near
        // 1/C(d, J-1). d <= 6, J-1 <= 3.
        use std::collections::HashMap;
        for (d, j_bins) in [(4usize, 3usize), (5, 4), (6, 3)] {
            let xs: Vec<f64> = (1..=d).map(|i| i as f64 / (d + 1) as f64).collect();
            let k = j_bins - 1;
            let n_subsets = binomial(d, k);
            let draws = 2000 * n_subsets;
            let mut rng = crate::rng::master_rng(7 + d as u64);
            let mut freq: HashMap<Vec<u64>, usize> = HashMap::new();
            for _ in 0..draws {
                let p = sample_knots_from_design(&xs, j_bins, &mut rng).unwrap();
                let key: Vec<u64> = p.knots()[1..j_bins].iter().map(|v| v.to_bits()).collect();
                *freq.entry(key).or_insert(0) += 1;
            }
            assert_eq!(freq.len(), n_subsets, "every subset should appear");
            let expected = draws as f64 / n_subsets as f64;
            let chi2: f64 = freq
                .values()
                .map(|&c| {
                    let diff = c as f64 - expected;
                    diff * diff / expected
                })
                .sum();
            // 0.999 quantile of chi-square with up to 19 df is < 43.8
            assert!(chi2 < 43.8, "d={d} J={j_bins}: chi2 = {chi2}");
        }
    }

    fn binomial(n: usize, k: usize) -> usize {
        if k > n {
            return 0;
        }
        let mut r = 1usize;
        for i in 0..k {
            r = r * (n - i) / (i + 1);
        }
        r
    }

    #[test]
    fn bin_count_concentration() {
        // With n = 20 J log(J+1) uniform design points over J equispaced
        // bins, min and max counts stay within [n/(2J), 2n/J] in >= 95% of
        // 200 seeded replications.
        use rand::Rng;
        let j_bins = 10usize;
        let n = (20.0 * j_bins as f64 * ((j_bins + 1) as f64).ln()).ceil() as usize;
        let p = Partition::equispaced(j_bins).unwrap();
        let mut hits = 0usize;
        let reps = 200;
        for rep in 0..reps {
            let mut rng = crate::rng::task_rng(2024, rep as u64);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let ys = vec![0.0; n];
            let d = Dataset::new(xs, ys).unwrap();
            let s = bin_stats(&d, &p);
            let min = *s.counts.iter().min().unwrap() as f64;
            let max = *s.counts.iter().max().unwrap() as f64;
            let lo = n as f64 / (2.0 * j_bins as f64);
            let hi = 2.0 * n as f64 / j_bins as f64;
            if min >= lo && max <= hi {
                hits += 1;
            }
        }
        assert!(
            hits as f64 >= 0.95 * reps as f64,
            "concentration held in only {hits}/{reps} replications"
        );
    }

    #[test]
    fn weights_sum_to_one() {
        let d = Dataset::new(vec![0.1, 0.4, 0.9], vec![1.0, 2.0, 3.0]).unwrap();
        let p = Partition::equispaced(3).unwrap();
        let s = bin_stats(&d, &p);
        assert_abs_diff_eq!(s.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn counts_sum_to_n(
            xs in proptest::collection::vec(0.0f64..=1.0, 1..200),
            j_bins in 1usize..12,
        ) {
            let n = xs.len();
            let ys = vec![0.0; n];
            let d = Dataset::new(xs, ys).unwrap();
            let p = Partition::equispaced(j_bins).unwrap();
            let s = bin_stats(&d, &p);
            prop_assert_eq!(s.counts.iter().sum::<usize>(), n);
        }

        #[test]
        fn every_x_in_exactly_one_bin(x in 0.0f64..=1.0, j_bins in 1usize..20) {
            let p = Partition::equispaced(j_bins).unwrap();
            let j = p.bin_index(x);
            prop_assert!(j < p.num_bins());
            let lo = p.knots()[j];
            let hi = p.knots()[j + 1];
            if j + 1 == p.num_bins() {
                prop_assert!(lo <= x && x <= hi);
            } else {
                prop_assert!(lo <= x && x < hi);
            }
        }
    }
}
