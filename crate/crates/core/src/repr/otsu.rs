use super::ReprError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    CMinus,
    CPlus,
}

/// Per-batch partition of triples into no-interaction (C−) and interaction
/// (C+) classes at the Otsu threshold over log contrastive distances.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchClasses {
    /// Threshold on the input values; ≤ threshold → C−, > threshold → C+.
    pub threshold: f64,
    pub labels: Vec<Class>,
    /// All inputs equal: no split exists, everything lands in C−.
    pub degenerate: bool,
}

impl BatchClasses {
    pub fn cplus_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&c| c == Class::CPlus).count() as f64
            / self.labels.len() as f64
    }
}

/// Guarded log of contrastive distances, `ln(d + 1e−12)`; two-means on log
/// distances is far more stable than on the heavy-tailed raw values.
pub fn log_distances(distances: &[f64]) -> Vec<f64> {
    distances.iter().map(|&d| (d + 1e-12).ln()).collect()
}

/// Exact one-dimensional 2-means: the threshold at a midpoint of consecutive
/// sorted values maximizing between-class variance (equivalently minimizing
/// within-class squared deviation). Ties resolve to the lowest threshold.
pub fn otsu_split(values: &[f64]) -> Result<BatchClasses, ReprError> {
    if values.len() < 2 {
        return Err(ReprError::BatchTooSmall(values.len()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();

    if sorted[0] == sorted[n - 1] {
        return Ok(BatchClasses {
            threshold: sorted[0],
            labels: vec![Class::CMinus; n],
            degenerate: true,
        });
    }

    // Prefix sums over the sorted order; a split after position k puts
    // sorted[..=k] below the threshold.
    let mut prefix = vec![0.0; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let total = prefix[n];

    let mut best_score = f64::NEG_INFINITY;
    let mut best_threshold = f64::NAN;
    for k in 0..n - 1 {
        if sorted[k] == sorted[k + 1] {
            continue;
        }
        let w0 = (k + 1) as f64;
        let w1 = (n - k - 1) as f64;
        let mu0 = prefix[k + 1] / w0;
        let mu1 = (total - prefix[k + 1]) / w1;
        let score = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if score > best_score {
            best_score = score;
            best_threshold = 0.5 * (sorted[k] + sorted[k + 1]);
        }
    }

    let labels = values
        .iter()
        .map(|&v| {
            if v <= best_threshold {
                Class::CMinus
            } else {
                Class::CPlus
            }
        })
        .collect();
    Ok(BatchClasses {
        threshold: best_threshold,
        labels,
        degenerate: false,
    })
}
