use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::maps::ClusterMap;
use crate::error::{Error, Result};
use crate::hypercube::{HyperCube, Layout};
use crate::par;

pub const MAX_CLUSTERS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this (L2, spectral units).
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            k: 16,
            seed: 0,
            max_iter: 20,
            tol: 1e-4,
        }
    }
}

/// Pixels whose spectra seed the initial centroids, one distinct pixel per cluster.
pub fn initial_centroid_indices(pixels: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, pixels, k).into_vec()
}

/// Lloyd's algorithm with L2 spectral distance.
///
/// Iterates until the assignment is a fixed point, the largest centroid shift
/// drops below `tol`, or `max_iter` assignment steps have run. Clusters left
/// empty are re-seeded with the pixel farthest from its own centroid.
pub fn kmeans_cluster(cube: &HyperCube, params: &KMeansParams) -> Result<ClusterMap> {
    cube.require_layout(Layout::BandSequential)?;
    let n = cube.pixel_count();
    let d = cube.bands_active();
    let k = params.k;
    if k == 0 || k > MAX_CLUSTERS {
        return Err(Error::InvalidInput(format!("K must be in 1..={MAX_CLUSTERS}, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidInput(format!("K = {k} exceeds {n} pixels")));
    }
    let data = cube.active_pixels_f32();

    let mut centroids: Vec<f64> = initial_centroid_indices(n, k, params.seed)
        .into_iter()
        .flat_map(|p| data[p * d..(p + 1) * d].iter().map(|&v| v as f64))
        .collect();
    let mut assignment = vec![0u8; n];
    let mut dist = vec![0f32; n];
    let mut previous: Option<Vec<u8>> = None;
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < params.max_iter.max(1) {
        let inertia = assign(&data, d, &centroids, &mut assignment, &mut dist);
        history.push(inertia);
        iterations += 1;
        if previous.as_deref() == Some(&assignment[..]) {
            break;
        }
        let (mut next, counts) = cluster_means(&data, d, k, &assignment);
        let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        if !empty.is_empty() {
            reseed_empty(&data, d, &dist, &empty, &mut next);
            centroids = next;
            previous = None;
            continue;
        }
        let shift = (0..k)
            .map(|c| {
                next[c * d..(c + 1) * d]
                    .iter()
                    .zip(&centroids[c * d..(c + 1) * d])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        centroids = next;
        previous = Some(assignment.clone());
        if shift < params.tol {
            break;
        }
    }

    // Report the assignment the centroids were averaged from.
    if let Some(prev) = previous {
        assignment = prev;
    }
    let inertia = par::reduce_ranges(
        n,
        0.0f64,
        |r| {
            r.map(|p| {
                let c = assignment[p] as usize;
                sq_dist_f64(&data[p * d..(p + 1) * d], &centroids[c * d..(c + 1) * d])
            })
            .sum()
        },
        |a, b| a + b,
    );
    Ok(ClusterMap {
        width: cube.width(),
        height: cube.height(),
        k,
        bands: d,
        assignment,
        centroids,
        inertia,
        inertia_history: history,
        iterations,
    })
}

fn sq_dist_f64(x: &[f32], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(&a, &b)| (a as f64 - b) * (a as f64 - b)).sum()
}

/// Nearest-centroid assignment; returns the inertia.
fn assign(data: &[f32], d: usize, centroids: &[f64], assignment: &mut [u8], dist: &mut [f32]) -> f64 {
    let k = centroids.len() / d;
    let cf: Vec<f32> = centroids.iter().map(|&v| v as f32).collect();
    const BLOCK: usize = 1024;
    par::for_each_chunk_pair_mut(assignment, BLOCK, dist, BLOCK, |blk, out, dst| {
        let base = blk * BLOCK;
        for (i, (a, dd)) in out.iter_mut().zip(dst.iter_mut()).enumerate() {
            let x = &data[(base + i) * d..(base + i + 1) * d];
            let mut best = 0usize;
            let mut best_d = f32::INFINITY;
            for (c, cen) in cf.chunks_exact(d).enumerate().take(k) {
                let s: f32 = x.iter().zip(cen).map(|(p, q)| (p - q) * (p - q)).sum();
                if s < best_d {
                    best_d = s;
                    best = c;
                }
            }
            *a = best as u8;
            *dd = best_d;
        }
    });
    par::reduce_ranges(
        assignment.len(),
        0.0f64,
        |r| r.map(|p| dist[p] as f64).sum(),
        |a, b| a + b,
    )
}

fn cluster_means(data: &[f32], d: usize, k: usize, assignment: &[u8]) -> (Vec<f64>, Vec<usize>) {
    let (sums, counts) = par::reduce_ranges(
        assignment.len(),
        (vec![0.0f64; k * d], vec![0usize; k]),
        |r| {
            let mut sums = vec![0.0f64; k * d];
            let mut counts = vec![0usize; k];
            for p in r {
                let c = assignment[p] as usize;
                counts[c] += 1;
                for (s, &v) in sums[c * d..(c + 1) * d].iter_mut().zip(&data[p * d..(p + 1) * d]) {
                    *s += v as f64;
                }
            }
            (sums, counts)
        },
        |(mut sa, mut ca), (sb, cb)| {
            sa.iter_mut().zip(&sb).for_each(|(a, b)| *a += b);
            ca.iter_mut().zip(&cb).for_each(|(a, b)| *a += b);
            (sa, ca)
        },
    );
    let mut means = sums;
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            means[c * d..(c + 1) * d].iter_mut().for_each(|v| *v *= inv);
        }
    }
    (means, counts)
}

fn reseed_empty(data: &[f32], d: usize, dist: &[f32], empty: &[usize], centroids: &mut [f64]) {
    let mut taken: Vec<usize> = Vec::with_capacity(empty.len());
    for &c in empty {
        let mut far = None;
        let mut far_d = f32::NEG_INFINITY;
        for (p, &dp) in dist.iter().enumerate() {
            if dp > far_d && !taken.contains(&p) {
                far_d = dp;
                far = Some(p);
            }
        }
        let p = far.expect("more pixels than clusters");
        taken.push(p);
        for (dst, &v) in centroids[c * d..(c + 1) * d].iter_mut().zip(&data[p * d..(p + 1) * d]) {
            *dst = v as f64;
        }
    }
}
