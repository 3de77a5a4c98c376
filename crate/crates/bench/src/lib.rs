//! Shared fixture builders for the kernel benchmarks.

use crowdsynth_core::flow::MotionVector;
use crowdsynth_core::frame::GrayFrame;
use crowdsynth_core::math::{mix_seed, Vec2};

/// Smooth deterministic texture; shifting `shift` translates it exactly.
pub fn textured_frame(width: usize, height: usize, shift: f64) -> GrayFrame {
    let mut f = GrayFrame::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let xs = x as f64 - shift;
            let ys = y as f64;
            let v = 128.0
                + 55.0 * (xs * 0.37).sin() * (ys * 0.29).cos()
                + 45.0 * ((xs + 2.0 * ys) * 0.17).sin();
            f.set(x, y, v.round().clamp(0.0, 255.0) as u8);
        }
    }
    f
}

/// Deterministic scatter of motion vectors over an image.
pub fn scattered_vectors(count: usize, width: f64, height: f64) -> Vec<MotionVector> {
    (0..count)
        .map(|i| {
            let a = mix_seed(3, i as u64) as f64 / u64::MAX as f64;
            let b = mix_seed(5, i as u64) as f64 / u64::MAX as f64;
            let theta = (mix_seed(7, i as u64) as f64 / u64::MAX as f64) * std::f64::consts::TAU;
            MotionVector::new(
                a * (width - 1.0),
                b * (height - 1.0),
                theta.cos() * 2.0,
                theta.sin() * 2.0,
                1,
            )
        })
        .collect()
}

/// Two separated point blobs for the clustering benchmarks.
pub fn blob_positions(per_blob: usize, separation: f64) -> Vec<Vec2> {
    let mut points = Vec::with_capacity(per_blob * 2);
    for salt in [0u64, 1] {
        let center = Vec2::new(separation * salt as f64, 0.0);
        for i in 0..per_blob {
            let a = mix_seed(salt * 2 + 11, i as u64) as f64 / u64::MAX as f64;
            let b = mix_seed(salt * 2 + 12, i as u64) as f64 / u64::MAX as f64;
            points.push(center + Vec2::new((a - 0.5) * 4.0, (b - 0.5) * 4.0));
        }
    }
    points
}
