use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::spec::NoiseSpec;
use super::Stream;
use crate::depthproc::{DepthFrame, MISSING};

/// Flying points never have another flying point within this Chebyshev distance.
pub const FLYING_POINT_SPACING_PX: usize = 3;

fn rng(seed: u64, stream: Stream, frame: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream.id(frame));
    r
}

/// Columns covered by the interference line in `frame`, if enabled. The line starts at the
/// left edge on frames `≡ 0 (mod period)` and reaches the right edge one period later.
pub fn interference_columns(noise: &NoiseSpec, width: usize, frame: u64) -> Option<std::ops::Range<usize>> {
    let line = &noise.interference_line;
    if line.period_frames == 0 || line.thickness_px == 0 {
        return None;
    }
    let phase = frame % line.period_frames;
    let start = (phase as u128 * width as u128 / line.period_frames as u128) as usize;
    Some(start..(start + line.thickness_px).min(width))
}

/// Corrupts a clean depth frame the way the time-of-flight sensor does.
///
/// Applied in order: fixed-pattern offset, per-frame jitter (both rounded to mm), flying
/// points, dropout, interference line. Valid samples stay in `[1, 65535]`. Output depends
/// only on `(clean, noise, frame_index, seed)`.
pub fn apply_depth_noise(clean: &DepthFrame, noise: &NoiseSpec, frame_index: u64, seed: u64) -> DepthFrame {
    let mut out = clean.clone();
    if noise.is_zero() {
        return out;
    }
    let (w, h) = (clean.width(), clean.height());
    let clamp = |v: f64| v.round().clamp(1.0, u16::MAX as f64) as u16;

    let gaussian = |sigma: f64, mut r: ChaCha8Rng, vals: &mut [u16]| {
        let dist = Normal::new(0.0, sigma).expect("sigma is finite");
        for v in vals.iter_mut() {
            let e = dist.sample(&mut r);
            if *v != MISSING {
                *v = clamp(*v as f64 + e);
            }
        }
    };
    if noise.depth_gaussian_sigma_mm > 0.0 {
        gaussian(
            noise.depth_gaussian_sigma_mm,
            rng(seed, Stream::DepthFixedPattern, 0),
            out.values_mut(),
        );
    }
    if noise.temporal_jitter_sigma_mm > 0.0 {
        gaussian(
            noise.temporal_jitter_sigma_mm,
            rng(seed, Stream::DepthJitter, frame_index),
            out.values_mut(),
        );
    }

    if noise.flying_point_rate > 0.0 {
        let mut r = rng(seed, Stream::FlyingPoints, frame_index);
        let s = FLYING_POINT_SPACING_PX;
        let mut count = 0usize;
        let mut occupied = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let pick = r.random_bool(noise.flying_point_rate);
                let farther = r.random_bool(0.5);
                if !pick || out.get(x, y) == MISSING {
                    continue;
                }
                let clear = (y.saturating_sub(s)..=(y + s).min(h - 1))
                    .all(|yy| (x.saturating_sub(s)..=(x + s).min(w - 1)).all(|xx| !occupied[yy * w + xx]));
                if clear {
                    occupied[y * w + x] = true;
                    count += 1;
                    let off = if farther {
                        noise.flying_point_offset_mm
                    } else {
                        -noise.flying_point_offset_mm
                    };
                    let v = out.get(x, y) as f64 + off;
                    out.set(x, y, clamp(v));
                }
            }
        }
        log::debug!("frame {frame_index}: {count} flying points");
    }

    if noise.dropout_rate > 0.0 {
        let mut r = rng(seed, Stream::Dropout, frame_index);
        for v in out.values_mut() {
            if r.random_bool(noise.dropout_rate) {
                *v = MISSING;
            }
        }
    }

    if let Some(cols) = interference_columns(noise, w, frame_index) {
        for y in 0..h {
            for x in cols.clone() {
                out.set(x, y, MISSING);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthscene::spec::InterferenceLine;

    #[test]
    fn zero_noise_is_identity() {
        let d = DepthFrame::new(3, 1, vec![0, 400, 900]).unwrap();
        assert_eq!(apply_depth_noise(&d, &NoiseSpec::default(), 5, 1), d);
    }

    #[test]
    fn dropout_fraction() {
        let d = DepthFrame::filled(400, 300, 500);
        let n = NoiseSpec {
            dropout_rate: 0.1,
            ..Default::default()
        };
        let out = apply_depth_noise(&d, &n, 0, 7);
        let frac = 1.0 - out.valid_count() as f64 / out.len() as f64;
        assert!((frac - 0.1).abs() < 0.01, "{frac}");
    }

    #[test]
    fn deterministic_and_frame_dependent() {
        let d = DepthFrame::filled(64, 48, 500);
        let n = NoiseSpec {
            dropout_rate: 0.05,
            temporal_jitter_sigma_mm: 3.0,
            flying_point_rate: 0.01,
            flying_point_offset_mm: 300.0,
            ..Default::default()
        };
        assert_eq!(apply_depth_noise(&d, &n, 3, 9), apply_depth_noise(&d, &n, 3, 9));
        assert_ne!(apply_depth_noise(&d, &n, 3, 9), apply_depth_noise(&d, &n, 4, 9));
        assert_ne!(apply_depth_noise(&d, &n, 3, 9), apply_depth_noise(&d, &n, 3, 10));
    }

    #[test]
    fn fixed_pattern_is_frame_independent() {
        let d = DepthFrame::filled(32, 32, 500);
        let n = NoiseSpec {
            depth_gaussian_sigma_mm: 4.0,
            ..Default::default()
        };
        let a = apply_depth_noise(&d, &n, 0, 1);
        assert_eq!(a, apply_depth_noise(&d, &n, 17, 1));
        assert_ne!(a, d);
    }

    #[test]
    fn flying_points_are_isolated() {
        let d = DepthFrame::filled(120, 90, 500);
        let n = NoiseSpec {
            flying_point_rate: 0.05,
            flying_point_offset_mm: 200.0,
            ..Default::default()
        };
        let out = apply_depth_noise(&d, &n, 0, 3);
        let fly: Vec<(usize, usize)> = (0..90)
            .flat_map(|y| (0..120).map(move |x| (x, y)))
            .filter(|&(x, y)| out.get(x, y) != 500)
            .collect();
        assert!(fly.len() > 50);
        for (i, a) in fly.iter().enumerate() {
            assert!(matches!(out.get(a.0, a.1), 300 | 700));
            for b in &fly[i + 1..] {
                assert!(a.0.abs_diff(b.0).max(a.1.abs_diff(b.1)) > FLYING_POINT_SPACING_PX);
            }
        }
    }

    #[test]
    fn interference_line_sweeps() {
        let n = NoiseSpec {
            interference_line: InterferenceLine {
                period_frames: 4,
                thickness_px: 3,
            },
            ..Default::default()
        };
        assert_eq!(interference_columns(&n, 100, 0), Some(0..3));
        assert_eq!(interference_columns(&n, 100, 2), Some(50..53));
        assert_eq!(interference_columns(&n, 100, 4), Some(0..3));
        let out = apply_depth_noise(&DepthFrame::filled(100, 2, 500), &n, 1, 0);
        assert_eq!(out.valid_count(), 200 - 6);
        assert_eq!(out.get(25, 1), 0);
    }
}
