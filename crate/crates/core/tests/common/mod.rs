#![allow(dead_code)]

use std::fs;
use std::path::Path;

/// Vertices of a PLY file, read without the library's writer code.
#[derive(Debug, Clone, PartialEq)]
pub struct PlyVertices {
    pub positions: Vec<[f32; 3]>,
    pub colors: Vec<[u8; 4]>,
}

/// Minimal PLY reader: one `vertex` element of float and uchar properties, in ascii
/// or binary little-endian form.
pub fn parse_ply(bytes: &[u8]) -> Result<PlyVertices, String> {
    let end = bytes
        .windows(11)
        .position(|w| w == b"end_header\n")
        .ok_or("no end_header")?
        + 11;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|e| e.to_string())?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err("missing magic".into());
    }
    let mut format = "";
    let mut count = 0usize;
    let mut props: Vec<(String, String)> = Vec::new();
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["format", f, "1.0"] => format = f,
            ["element", "vertex", n] => count = n.parse().map_err(|_| "bad count")?,
            ["element", other, _] => return Err(format!("unexpected element {other}")),
            ["property", ty, name] => props.push((ty.to_string(), name.to_string())),
            ["comment", ..] | ["end_header"] => {}
            _ => return Err(format!("bad header line {line:?}")),
        }
    }
    let index = |name: &str| props.iter().position(|(_, n)| n == name).ok_or(format!("no {name}"));
    let cols: Vec<usize> = ["x", "y", "z", "red", "green", "blue", "alpha"]
        .iter()
        .map(|n| index(n))
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(count);
    match format {
        "ascii" => {
            let body = std::str::from_utf8(&bytes[end..]).map_err(|e| e.to_string())?;
            for line in body.lines().filter(|l| !l.trim().is_empty()) {
                let v: Vec<f64> = line
                    .split_whitespace()
                    .map(|s| s.parse::<f64>().map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?;
                if v.len() != props.len() {
                    return Err("row width".into());
                }
                rows.push(v);
            }
        }
        "binary_little_endian" => {
            let mut at = end;
            for _ in 0..count {
                let mut row = Vec::new();
                for (ty, _) in &props {
                    let v = match ty.as_str() {
                        "float" => {
                            let b = bytes.get(at..at + 4).ok_or("truncated")?;
                            at += 4;
                            f32::from_le_bytes(b.try_into().unwrap()) as f64
                        }
                        "uchar" => {
                            let b = *bytes.get(at).ok_or("truncated")?;
                            at += 1;
                            b as f64
                        }
                        t => return Err(format!("unsupported type {t}")),
                    };
                    row.push(v);
                }
                rows.push(row);
            }
            if at != bytes.len() {
                return Err("trailing bytes".into());
            }
        }
        f => return Err(format!("unsupported format {f:?}")),
    }
    if rows.len() != count {
        return Err(format!("{} rows for {count} vertices", rows.len()));
    }
    Ok(PlyVertices {
        positions: rows
            .iter()
            .map(|r| [r[cols[0]] as f32, r[cols[1]] as f32, r[cols[2]] as f32])
            .collect(),
        colors: rows.iter().map(|r| [3, 4, 5, 6].map(|k| r[cols[k]] as u8)).collect(),
    })
}

pub fn read_ply(path: &Path) -> PlyVertices {
    parse_ply(&fs::read(path).unwrap()).unwrap()
}

/// Every regular file under `root` with its bytes, sorted by relative path.
pub fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

use hsar_core::classify::{BinaryClassifier, ClassInfo, SvmModel, MODEL_VERSION};
use hsar_core::depthproc::{DepthFrame, MISSING};
use hsar_core::geometry::CameraModel;
use rand::Rng;

/// Random valid model with distinct gammas so no support vectors are shared.
pub fn random_model(rng: &mut impl Rng, features: usize, classes: usize, svs: usize) -> SvmModel {
    let classifiers = (0..classes)
        .map(|_| BinaryClassifier {
            gamma: rng.random_range(0.05..2.0),
            bias: rng.random_range(-1.0..1.0),
            platt_a: rng.random_range(-3.0..-0.2),
            platt_b: rng.random_range(-0.5..0.5),
            support_vectors: (0..svs)
                .map(|_| (0..features).map(|_| rng.random_range(0.0..1.5)).collect())
                .collect(),
            dual_coefs: (0..svs).map(|_| rng.random_range(-2.0..2.0)).collect(),
        })
        .collect();
    SvmModel {
        version: MODEL_VERSION,
        feature_count: features,
        classes: (0..classes)
            .map(|c| ClassInfo::new(format!("c{c}"), [(c * 60) as u8, 100, 200]))
            .collect(),
        classifiers,
    }
}

/// Brute-force class probabilities of one feature vector: kernel sums evaluated
/// term by term, logistic calibration, renormalization.
pub fn oracle_probabilities(model: &SvmModel, x: &[f64]) -> Vec<f64> {
    let mut p: Vec<f64> = model
        .classifiers
        .iter()
        .map(|clf| {
            let mut f = clf.bias;
            for (sv, coef) in clf.support_vectors.iter().zip(&clf.dual_coefs) {
                let mut d2 = 0.0;
                for k in 0..x.len() {
                    d2 += (x[k] - sv[k]).powi(2);
                }
                f += coef * (-clf.gamma * d2).exp();
            }
            1.0 / (1.0 + (clf.platt_a * f + clf.platt_b).exp())
        })
        .collect();
    let s: f64 = p.iter().sum();
    if s > 0.0 && s.is_finite() {
        p.iter_mut().for_each(|v| *v /= s);
    } else {
        let n = p.len() as f64;
        p.fill(1.0 / n);
    }
    p
}

fn point(depth: &DepthFrame, cam: &CameraModel, x: usize, y: usize) -> Option<[f64; 3]> {
    let d = depth.get(x, y);
    if d == MISSING {
        return None;
    }
    let z = d as f64 * cam.depth_scale;
    let k = cam.k;
    Some([
        (x as f64 - k[(0, 2)]) * z / k[(0, 0)],
        (y as f64 - k[(1, 2)]) * z / k[(1, 1)],
        z,
    ])
}

fn d2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum()
}

/// Statistical outlier removal by direct enumeration of every full window.
pub fn naive_statistical(depth: &DepthFrame, cam: &CameraModel, window: usize, n_std: f64) -> Vec<u16> {
    let (w, h, r) = (depth.width(), depth.height(), window / 2);
    let mut out = depth.values().to_vec();
    for y in 0..h {
        for x in 0..w {
            if x < r || y < r || x + r >= w || y + r >= h {
                continue;
            }
            let Some(center) = point(depth, cam, x, y) else {
                continue;
            };
            let mut nb = Vec::new();
            for yy in y - r..=y + r {
                for xx in x - r..=x + r {
                    if let Some(p) = point(depth, cam, xx, yy) {
                        nb.push(p);
                    }
                }
            }
            let n = nb.len() as f64;
            let mut c = [0.0; 3];
            for p in &nb {
                for i in 0..3 {
                    c[i] += p[i];
                }
            }
            let c = c.map(|v| v / n);
            let dists: Vec<f64> = nb.iter().map(|&p| d2(p, c).sqrt()).collect();
            let mean = dists.iter().sum::<f64>() / n;
            let std = (dists.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            if d2(center, c).sqrt() > mean + n_std * std {
                out[y * w + x] = MISSING;
            }
        }
    }
    out
}

/// Radius outlier removal by direct enumeration of the clipped window.
pub fn naive_radius(depth: &DepthFrame, cam: &CameraModel, window: usize, radius_m: f64) -> Vec<u16> {
    let (w, h, r) = (depth.width() as i64, depth.height() as i64, (window / 2) as i64);
    let mut out = depth.values().to_vec();
    for y in 0..h {
        for x in 0..w {
            let Some(center) = point(depth, cam, x as usize, y as usize) else {
                continue;
            };
            let mut supported = false;
            for yy in y - r..=y + r {
                for xx in x - r..=x + r {
                    if (xx, yy) == (x, y) || xx < 0 || yy < 0 || xx >= w || yy >= h {
                        continue;
                    }
                    if let Some(p) = point(depth, cam, xx as usize, yy as usize) {
                        supported |= d2(p, center) <= radius_m * radius_m;
                    }
                }
            }
            if !supported {
                out[(y * w + x) as usize] = MISSING;
            }
        }
    }
    out
}

/// Smooth tilted surface with iid noise, dropout and sparse spikes.
pub fn random_depth_frame(rng: &mut impl Rng, w: usize, h: usize) -> DepthFrame {
    let base = rng.random_range(400.0..800.0);
    let (gx, gy) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let noise = rng.random_range(0.0..8.0);
    let dropout = rng.random_range(0.0..0.3);
    let spikes = rng.random_range(0.0..0.05);
    let values = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            if rng.random::<f64>() < dropout {
                return MISSING;
            }
            let mut d = base + gx * x + gy * y + noise * (rng.random::<f64>() - 0.5);
            if rng.random::<f64>() < spikes {
                d += rng.random_range(-300.0..300.0);
            }
            d.clamp(1.0, 65535.0).round() as u16
        })
        .collect();
    DepthFrame::new(w, h, values).unwrap()
}

/// Lloyd's algorithm from the given seed pixels, f64 throughout. Empty clusters take
/// the not yet taken pixel farthest from its centroid, lowest index first.
pub fn naive_lloyd(data: &[Vec<f64>], seeds: &[usize], max_iter: usize) -> Vec<usize> {
    let k = seeds.len();
    let mut cents: Vec<Vec<f64>> = seeds.iter().map(|&s| data[s].clone()).collect();
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut prev: Option<Vec<usize>> = None;
    for _ in 0..max_iter {
        let mut dist = vec![0.0; data.len()];
        let assign: Vec<usize> = data
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let mut best = 0;
                for c in 1..k {
                    if sq(x, &cents[c]) < sq(x, &cents[best]) {
                        best = c;
                    }
                }
                dist[i] = sq(x, &cents[best]);
                best
            })
            .collect();
        if prev.as_ref() == Some(&assign) {
            return assign;
        }
        let mut sums = vec![vec![0.0; data[0].len()]; k];
        let mut counts = vec![0usize; k];
        for (x, &a) in data.iter().zip(&assign) {
            counts[a] += 1;
            sums[a].iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        let mut taken = Vec::new();
        let mut any_empty = false;
        for c in 0..k {
            if counts[c] > 0 {
                cents[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                any_empty = true;
                let far = (0..data.len())
                    .filter(|p| !taken.contains(p))
                    .fold(None, |best: Option<usize>, p| match best {
                        Some(b) if dist[b] >= dist[p] => Some(b),
                        _ => Some(p),
                    })
                    .unwrap();
                taken.push(far);
                cents[c] = data[far].clone();
            }
        }
        prev = if any_empty { None } else { Some(assign) };
    }
    prev.expect("converged within max_iter")
}
