use image::RgbImage;

use super::maps::{ClassInfo, ClusterMap, LabelMap, ProbabilityMap};
use crate::error::{Error, Result};
use crate::par;

/// Replaces every pixel's probabilities with the mean over its cluster.
pub fn majority_vote(probs: &ProbabilityMap, clusters: &ClusterMap) -> Result<ProbabilityMap> {
    if (probs.width(), probs.height()) != (clusters.width, clusters.height) {
        return Err(Error::GeometryMismatch(format!(
            "probabilities are {}x{}, clusters {}x{}",
            probs.width(),
            probs.height(),
            clusters.width,
            clusters.height
        )));
    }
    let c = probs.classes();
    let k = clusters.k;
    let mut sums = vec![0.0f64; k * c];
    let mut counts = vec![0usize; k];
    for (row, &a) in probs.rows().zip(&clusters.assignment) {
        let a = a as usize;
        counts[a] += 1;
        for (s, &p) in sums[a * c..(a + 1) * c].iter_mut().zip(row) {
            *s += p as f64;
        }
    }
    let means: Vec<f32> = sums
        .chunks(c)
        .zip(&counts)
        .flat_map(|(s, &n)| s.iter().map(move |v| if n > 0 { (v / n as f64) as f32 } else { 0.0 }))
        .collect();
    let out = par::map_slice(&clusters.assignment, |&a| a as usize)
        .into_iter()
        .flat_map(|a| means[a * c..(a + 1) * c].iter().copied())
        .collect();
    ProbabilityMap::new(probs.width(), probs.height(), c, out)
}

/// Probability-weighted blend of the class colors, rounded per channel.
pub fn colorize(probs: &ProbabilityMap, classes: &[ClassInfo]) -> Result<RgbImage> {
    if classes.len() != probs.classes() {
        return Err(Error::InvalidInput(format!(
            "{} colors for {} classes",
            classes.len(),
            probs.classes()
        )));
    }
    let mut img = RgbImage::new(probs.width() as u32, probs.height() as u32);
    for (px, row) in img.pixels_mut().zip(probs.rows()) {
        let mut acc = [0.0f64; 3];
        for (p, class) in row.iter().zip(classes) {
            for ch in 0..3 {
                acc[ch] += *p as f64 * class.color[ch] as f64;
            }
        }
        px.0 = acc.map(|v| v.round().clamp(0.0, 255.0) as u8);
    }
    Ok(img)
}

/// Most probable class per pixel; ties go to the lowest class index.
pub fn argmax_labels(probs: &ProbabilityMap) -> LabelMap {
    let labels = probs
        .rows()
        .map(|row| {
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            best as u8
        })
        .collect();
    LabelMap::new(probs.width(), probs.height(), labels).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clusters(assignment: Vec<u8>, k: usize, w: usize) -> ClusterMap {
        let h = assignment.len() / w;
        ClusterMap {
            width: w,
            height: h,
            k,
            bands: 1,
            assignment,
            centroids: vec![0.0; k],
            inertia: 0.0,
            inertia_history: vec![],
            iterations: 1,
        }
    }

    #[test]
    fn one_cluster_averages_everything() {
        let probs = ProbabilityMap::new(2, 2, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let out = majority_vote(&probs, &clusters(vec![0; 4], 1, 2)).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn singleton_clusters_are_identity() {
        let probs = ProbabilityMap::new(3, 1, 2, vec![0.2, 0.8, 0.6, 0.4, 1.0, 0.0]).unwrap();
        let out = majority_vote(&probs, &clusters(vec![0, 1, 2], 3, 3)).unwrap();
        assert_eq!(out, probs);
    }

    #[test]
    fn grid_mismatch() {
        let probs = ProbabilityMap::new(2, 1, 2, vec![0.5; 4]).unwrap();
        assert!(majority_vote(&probs, &clusters(vec![0; 3], 1, 3)).is_err());
    }

    #[test]
    fn pure_tumor_is_red() {
        let probs = ProbabilityMap::new(1, 1, 4, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let img = colorize(&probs, &ClassInfo::default_palette()).unwrap();
        assert_eq!(img.get_pixel(0, 0).0, [255, 0, 0]);
    }

    #[test]
    fn uniform_blend_of_the_palette() {
        let probs = ProbabilityMap::new(1, 1, 4, vec![0.25; 4]).unwrap();
        let img = colorize(&probs, &ClassInfo::default_palette()).unwrap();
        assert_eq!(img.get_pixel(0, 0).0, [128, 90, 109]);
    }

    #[test]
    fn one_hot_colorize_is_a_lookup() {
        let palette = ClassInfo::default_palette();
        let labels = LabelMap::new(4, 1, vec![3, 0, 2, 1]).unwrap();
        let img = colorize(&ProbabilityMap::one_hot(&labels, 4).unwrap(), &palette).unwrap();
        for (x, &l) in labels.labels().iter().enumerate() {
            assert_eq!(img.get_pixel(x as u32, 0).0, palette[l as usize].color[..3]);
        }
        assert_eq!(argmax_labels(&ProbabilityMap::one_hot(&labels, 4).unwrap()), labels);
    }

    #[test]
    fn argmax_and_ties() {
        let probs = ProbabilityMap::new(1, 1, 3, vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(argmax_labels(&probs).labels(), &[1]);
        let tie = ProbabilityMap::new(1, 1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(argmax_labels(&tie).labels(), &[0]);
    }
}
