//! Nearest-centroid cluster purity with leave-one-out centroids and cosine
//! distance; the feature-decomposition diagnostic.

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - dot / (na * nb)
}

/// Fraction of samples whose nearest class centroid (computed without the
/// sample itself) carries the sample's own label. Distance ties resolve to
/// the lowest class index.
pub fn nearest_centroid_purity(features: &[Vec<f64>], labels: &[usize], n_classes: usize) -> f64 {
    assert_eq!(features.len(), labels.len());
    assert!(n_classes >= 1);
    let d = features[0].len();
    let mut sums = vec![vec![0f64; d]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (f, &l) in features.iter().zip(labels) {
        for (s, &v) in sums[l].iter_mut().zip(f) {
            *s += v;
        }
        counts[l] += 1;
    }
    let mut hits = 0usize;
    for (f, &l) in features.iter().zip(labels) {
        let mut best_class = 0usize;
        let mut best_dist = f64::INFINITY;
        for cls in 0..n_classes {
            let (mut centroid, mut count) = (sums[cls].clone(), counts[cls] as f64);
            if cls == l {
                for (c, &v) in centroid.iter_mut().zip(f) {
                    *c -= v;
                }
                count -= 1.0;
            }
            if count <= 0.0 {
                continue;
            }
            for c in centroid.iter_mut() {
                *c /= count;
            }
            let dist = cosine_distance(f, &centroid);
            if dist < best_dist {
                best_dist = dist;
                best_class = cls;
            }
        }
        if best_class == l {
            hits += 1;
        }
    }
    hits as f64 / features.len().max(1) as f64
}
