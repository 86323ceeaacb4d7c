use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use rand::Rng;

use super::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{stream, stream_rng};

/// Rotate a square row-major image by `angle` radians (counter-clockwise)
/// about its centre, sampling with bilinear interpolation and zero fill.
pub fn rotate_image(img: &[f64], side: usize, angle: f64) -> Vec<f64> {
    assert_eq!(img.len(), side * side, "image is not side × side");
    let centre = (side as f64 - 1.0) / 2.0;
    let (sin, cos) = angle.sin_cos();
    let pixel = |y: isize, x: isize| -> f64 {
        if y < 0 || x < 0 || y >= side as isize || x >= side as isize {
            0.0
        } else {
            img[y as usize * side + x as usize]
        }
    };
    let mut out = vec![0.0; side * side];
    for row in 0..side {
        for col in 0..side {
            let dx = col as f64 - centre;
            let dy = row as f64 - centre;
            let sx = cos * dx - sin * dy + centre;
            let sy = sin * dx + cos * dy + centre;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let (x0, y0) = (x0 as isize, y0 as isize);
            let top = (1.0 - fx) * pixel(y0, x0) + fx * pixel(y0, x0 + 1);
            let bottom = (1.0 - fx) * pixel(y0 + 1, x0) + fx * pixel(y0 + 1, x0 + 1);
            out[row * side + col] = (1.0 - fy) * top + fy * bottom;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyTwoViewOptions {
    /// Rotation angles are drawn from `Uniform(−max_angle, max_angle)`.
    pub max_angle: f64,
    /// Upper end of the additive uniform noise on view 2.
    pub noise_amplitude: f64,
}

impl Default for NoisyTwoViewOptions {
    fn default() -> Self {
        Self { max_angle: FRAC_PI_4, noise_amplitude: 1.0 }
    }
}

/// Two-view MNIST: rotated digits and a noisy same-label partner.
pub fn make_noisy_two_view(images: &Matrix, labels: &[u32], seed: u64) -> Result<MultiViewDataset> {
    make_noisy_two_view_with(images, labels, seed, NoisyTwoViewOptions::default())
}

pub fn make_noisy_two_view_with(
    images: &Matrix,
    labels: &[u32],
    seed: u64,
    options: NoisyTwoViewOptions,
) -> Result<MultiViewDataset> {
    let n = images.rows();
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!("{} labels for {n} images", labels.len())));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("no images".into()));
    }
    let side = (images.cols() as f64).sqrt().round() as usize;
    if side * side != images.cols() {
        return Err(Error::ShapeMismatch(format!("{} pixels is not a square image", images.cols())));
    }
    if let Some(v) = images.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidConfig(format!("pixel value {v} outside [0, 1]")));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::InvalidConfig(format!("label {l} outside 0..=9")));
    }

    let mut by_label: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }

    let mut angle_rng = stream_rng(seed, stream::MNIST_ANGLE);
    let mut view1 = Matrix::zeros(n, images.cols());
    for i in 0..n {
        let u: f64 = angle_rng.random();
        let angle = options.max_angle * (2.0 * u - 1.0);
        let rotated = rotate_image(images.row(i), side, angle);
        for (o, v) in view1.row_mut(i).iter_mut().zip(rotated) {
            *o = v.clamp(0.0, 1.0);
        }
    }

    let mut partner_rng = stream_rng(seed, stream::MNIST_PARTNER);
    let mut noise_rng = stream_rng(seed, stream::MNIST_NOISE);
    let mut view2 = Matrix::zeros(n, images.cols());
    let mut lonely = 0usize;
    for i in 0..n {
        let pool = &by_label[&labels[i]];
        let partner = if pool.len() == 1 {
            lonely += 1;
            i
        } else {
            // uniform over the pool minus `i`
            let pick = partner_rng.random_range(0..pool.len() - 1);
            let pos = pool.binary_search(&i).expect("i is in its own label pool");
            pool[if pick >= pos { pick + 1 } else { pick }]
        };
        for (o, v) in view2.row_mut(i).iter_mut().zip(images.row(partner)) {
            let e: f64 = noise_rng.random();
            *o = (v + options.noise_amplitude * e).clamp(0.0, 1.0);
        }
    }

    let mut data = MultiViewDataset::new(vec![view1, view2], Some(labels.to_vec()))?
        .with_names(vec!["rotated".into(), "noisy".into()])?
        .with_provenance(format!("noisy two-view MNIST, n {n}, seed {seed}"));
    data.meta.notes.push(format!(
        "view 1: rotation U(-{:.6}, {:.6}) rad, bilinear, zero fill, no noise",
        options.max_angle, options.max_angle
    ));
    data.meta.notes.push(format!(
        "view 2: same-label partner excluding self, additive U(0, {}) noise, clipped to [0, 1]",
        options.noise_amplitude
    ));
    if lonely > 0 {
        data.meta.notes.push(format!("{lonely} samples had no same-label partner and were paired with themselves"));
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images() -> (Matrix, Vec<u32>) {
        let img = Matrix::from_fn(6, 16, |r, c| ((r * 7 + c * 3) % 11) as f64 / 10.0);
        (img, vec![0, 1, 0, 2, 1, 0])
    }

    #[test]
    fn zero_rotation_is_identity() {
        let (img, _) = images();
        let out = rotate_image(img.row(2), 4, 0.0);
        assert_eq!(out, img.row(2));
    }

    #[test]
    fn quarter_turn_moves_corners() {
        let img: Vec<f64> = (0..9).map(f64::from).collect();
        let out = rotate_image(&img, 3, std::f64::consts::FRAC_PI_2);
        // counter-clockwise: the top-right corner moves to the top-left
        assert!((out[0] - 2.0).abs() < 1e-12);
        assert!((out[4] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn pixels_in_range_and_partners_share_labels() {
        let (img, labels) = images();
        let d = make_noisy_two_view(&img, &labels, 5).unwrap();
        for v in d.views() {
            assert!(v.data().iter().all(|x| (0.0..=1.0).contains(x)));
        }
        assert_eq!(d.labels().unwrap(), labels.as_slice());
        assert_eq!(d.meta.notes.len(), 3);
        assert_eq!(make_noisy_two_view(&img, &labels, 5).unwrap(), d);
    }

    #[test]
    fn options_zero_angle_keeps_view_one() {
        let (img, labels) = images();
        let opts = NoisyTwoViewOptions { max_angle: 0.0, noise_amplitude: 0.0 };
        let d = make_noisy_two_view_with(&img, &labels, 1, opts).unwrap();
        assert!(d.view(0).sub(&img).max_abs() <= 1e-12);
        // noiseless partner: view 2 row is another image with the same label
        for i in 0..6 {
            let row = d.view(1).row(i);
            let j = (0..6).find(|&j| img.row(j) == row).unwrap();
            assert_eq!(labels[i], labels[j]);
            if i != 3 {
                assert_ne!(i, j);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let (img, mut labels) = images();
        assert!(make_noisy_two_view(&img, &labels[..3], 0).is_err());
        labels[0] = 12;
        assert!(make_noisy_two_view(&img, &labels, 0).is_err());
        let bad = Matrix::filled(2, 4, 1.5);
        assert!(make_noisy_two_view(&bad, &[0, 0], 0).is_err());
    }
}
