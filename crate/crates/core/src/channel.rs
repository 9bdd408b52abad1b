//! Common subcarrier grid and frequency-selective Rayleigh fading.
//!
//! Every operator shares one uniform grid of `N_sub` subcarriers spaced
//! `Δ_sub = B / N_sub` apart. The grid may span several non-adjacent segments;
//! indices run left to right across them. A [`ChannelRealization`] holds the
//! effective SNR per unit transmit power `h = |z|² / (N0 Δ_sub)` for every
//! (operator, user, subcarrier) triple.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tap powers (dB) of the six-path reference profile.
pub const REFERENCE_PATH_POWERS_DB: [f64; 6] = [0.0, -4.35, -8.69, -13.08, -17.43, -21.78];

/// -170 dBm/Hz expressed in W/Hz.
pub const REFERENCE_NOISE_PSD: f64 = 1e-20;

const REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("grid bandwidth must be positive and finite, got {0}")]
    ZeroBandwidth(f64),
    #[error("grid needs at least one subcarrier")]
    NoSubcarriers,
    #[error("grid needs at least one segment")]
    NoSegments,
    #[error("segment {index} has width {width} Hz, not a multiple of the {spacing} Hz spacing")]
    SegmentNotAligned { index: usize, width: f64, spacing: f64 },
    #[error("segment widths sum to {sum} Hz but the grid bandwidth is {total} Hz")]
    WidthMismatch { sum: f64, total: f64 },
    #[error("segment {0} overlaps or precedes the previous segment")]
    SegmentOrder(usize),
    #[error("invalid channel profile: {0}")]
    InvalidProfile(String),
    #[error("every operator needs at least one user")]
    NoUsers,
}

/// A contiguous band of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_hz: f64,
    pub width_hz: f64,
    /// Index of the first subcarrier inside this segment.
    pub first_index: usize,
    pub len: usize,
}

impl Segment {
    pub fn end_index(&self) -> usize {
        self.first_index + self.len
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.first_index..self.end_index()).contains(&index)
    }
}

/// The uniform common subcarrier grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    total_bandwidth: f64,
    n_subcarriers: usize,
    spacing: f64,
    segments: Vec<Segment>,
}

impl GridSpec {
    /// Builds a grid from `(start_hz, width_hz)` segments, which must be
    /// ordered, non-overlapping, and each an integer number of subcarriers wide.
    pub fn build(
        total_bandwidth: f64,
        n_subcarriers: usize,
        segments: &[(f64, f64)],
    ) -> Result<Self, ChannelError> {
        if !(total_bandwidth.is_finite() && total_bandwidth > 0.0) {
            return Err(ChannelError::ZeroBandwidth(total_bandwidth));
        }
        if n_subcarriers == 0 {
            return Err(ChannelError::NoSubcarriers);
        }
        if segments.is_empty() {
            return Err(ChannelError::NoSegments);
        }
        let spacing = total_bandwidth / n_subcarriers as f64;

        let sum: f64 = segments.iter().map(|s| s.1).sum();
        if (sum - total_bandwidth).abs() > REL_TOL * total_bandwidth {
            return Err(ChannelError::WidthMismatch { sum, total: total_bandwidth });
        }

        let mut out = Vec::with_capacity(segments.len());
        let mut first_index = 0;
        let mut prev_end = f64::NEG_INFINITY;
        for (index, &(start_hz, width_hz)) in segments.iter().enumerate() {
            let count = width_hz / spacing;
            let rounded = count.round();
            if width_hz <= 0.0 || rounded < 1.0 || (count - rounded).abs() > REL_TOL * count.max(1.0) {
                return Err(ChannelError::SegmentNotAligned { index, width: width_hz, spacing });
            }
            if start_hz < prev_end - REL_TOL * total_bandwidth {
                return Err(ChannelError::SegmentOrder(index));
            }
            prev_end = start_hz + width_hz;
            let len = rounded as usize;
            out.push(Segment { start_hz, width_hz, first_index, len });
            first_index += len;
        }
        debug_assert_eq!(first_index, n_subcarriers);

        Ok(Self { total_bandwidth, n_subcarriers, spacing, segments: out })
    }

    /// A single contiguous band starting at 0 Hz.
    pub fn contiguous(total_bandwidth: f64, n_subcarriers: usize) -> Result<Self, ChannelError> {
        Self::build(total_bandwidth, n_subcarriers, &[(0.0, total_bandwidth)])
    }

    pub fn total_bandwidth(&self) -> f64 {
        self.total_bandwidth
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    /// Subcarrier spacing `Δ_sub` in Hz.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Width of the narrowest segment (`B_low`).
    pub fn smallest_segment_width(&self) -> f64 {
        self.segments.iter().map(|s| s.width_hz).fold(f64::INFINITY, f64::min)
    }

    pub fn segment_of(&self, index: usize) -> Option<usize> {
        self.segments.iter().position(|s| s.contains(index))
    }

    pub fn center_frequency(&self, index: usize) -> Option<f64> {
        let seg = &self.segments[self.segment_of(index)?];
        Some(seg.start_hz + ((index - seg.first_index) as f64 + 0.5) * self.spacing)
    }

    /// Inverse of [`center_frequency`](Self::center_frequency): the subcarrier
    /// whose band contains `freq_hz`.
    pub fn index_at(&self, freq_hz: f64) -> Option<usize> {
        self.segments.iter().find_map(|s| {
            let offset = (freq_hz - s.start_hz) / self.spacing;
            (offset >= 0.0 && offset < s.len as f64).then(|| s.first_index + offset.floor() as usize)
        })
    }
}

impl Default for GridSpec {
    /// 512 subcarriers over a contiguous 10 MHz band.
    fn default() -> Self {
        Self::contiguous(10e6, 512).expect("reference grid is valid")
    }
}

/// Power-delay profile and noise level of the fading channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    /// Relative tap powers in dB, path 0 first.
    pub path_powers_db: Vec<f64>,
    /// Nominal exponential decay factor of the profile.
    pub decay_factor: f64,
    /// Seconds; taps are spaced uniformly over `[0, max_delay_spread]`.
    pub max_delay_spread: f64,
    /// Hz. Carried for completeness; each realization is a single snapshot.
    pub max_doppler: f64,
    /// Noise power spectral density `N0` in W/Hz.
    pub noise_psd: f64,
}

impl ChannelProfile {
    /// Profile whose tap `l` has relative power `e^{-decay·l}`.
    pub fn exponential(n_paths: usize, decay_factor: f64) -> Self {
        let path_powers_db = (0..n_paths)
            .map(|l| 10.0 * (-decay_factor * l as f64).exp().log10())
            .collect();
        Self { path_powers_db, decay_factor, ..Self::default() }
    }

    pub fn n_paths(&self) -> usize {
        self.path_powers_db.len()
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |msg: &str| Err(ChannelError::InvalidProfile(msg.to_string()));
        if self.path_powers_db.is_empty() {
            return bad("at least one path is required");
        }
        if self.path_powers_db.iter().any(|p| !p.is_finite()) {
            return bad("path powers must be finite");
        }
        if !(self.decay_factor >= 0.0) {
            return bad("decay factor must be non-negative");
        }
        if !(self.max_delay_spread >= 0.0 && self.max_delay_spread.is_finite()) {
            return bad("delay spread must be non-negative");
        }
        if !(self.noise_psd > 0.0 && self.noise_psd.is_finite()) {
            return bad("noise PSD must be positive");
        }
        Ok(())
    }

    /// Linear tap powers scaled to unit total.
    pub fn normalized_path_powers(&self) -> Vec<f64> {
        let linear: Vec<f64> = self.path_powers_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
        let total: f64 = linear.iter().sum();
        linear.into_iter().map(|p| p / total).collect()
    }

    pub fn path_delays(&self) -> Vec<f64> {
        let n = self.n_paths();
        if n == 1 {
            return vec![0.0];
        }
        (0..n).map(|l| self.max_delay_spread * l as f64 / (n - 1) as f64).collect()
    }
}

impl Default for ChannelProfile {
    /// Six Rayleigh paths, 5 µs spread, 30 Hz Doppler, -170 dBm/Hz noise.
    fn default() -> Self {
        Self {
            path_powers_db: REFERENCE_PATH_POWERS_DB.to_vec(),
            decay_factor: 1.0,
            max_delay_spread: 5e-6,
            max_doppler: 30.0,
            noise_psd: REFERENCE_NOISE_PSD,
        }
    }
}

/// Effective SNR per unit power for every (operator, user, subcarrier).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    gains: Vec<f64>,
    users: Vec<usize>,
    /// Row offset of each operator's first user.
    offsets: Vec<usize>,
    n_subcarriers: usize,
    seed: u64,
}

impl ChannelRealization {
    /// Wraps an explicit gain table `gains[operator][user][subcarrier]`.
    pub fn from_table(gains: Vec<Vec<Vec<f64>>>, seed: u64) -> Result<Self, ChannelError> {
        let n_subcarriers = gains
            .first()
            .and_then(|op| op.first())
            .map(Vec::len)
            .ok_or(ChannelError::NoUsers)?;
        if n_subcarriers == 0 {
            return Err(ChannelError::NoSubcarriers);
        }
        let mut users = Vec::new();
        let mut offsets = Vec::new();
        let mut flat = Vec::new();
        for op in &gains {
            if op.is_empty() {
                return Err(ChannelError::NoUsers);
            }
            offsets.push(flat.len() / n_subcarriers);
            users.push(op.len());
            for row in op {
                if row.len() != n_subcarriers || row.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
                    return Err(ChannelError::InvalidProfile(
                        "gain rows must be positive, finite, and equally long".into(),
                    ));
                }
                flat.extend_from_slice(row);
            }
        }
        Ok(Self { gains: flat, users, offsets, n_subcarriers, seed })
    }

    pub fn n_operators(&self) -> usize {
        self.users.len()
    }

    pub fn n_users(&self, operator: usize) -> usize {
        self.users[operator]
    }

    pub fn users_per_operator(&self) -> &[usize] {
        &self.users
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn gain(&self, operator: usize, user: usize, subcarrier: usize) -> f64 {
        self.user_gains(operator, user)[subcarrier]
    }

    pub fn user_gains(&self, operator: usize, user: usize) -> &[f64] {
        assert!(user < self.users[operator], "user {user} out of range for operator {operator}");
        let row = self.offsets[operator] + user;
        &self.gains[row * self.n_subcarriers..(row + 1) * self.n_subcarriers]
    }

    /// Mean gain over all users and subcarriers of one operator.
    pub fn mean_gain(&self, operator: usize) -> f64 {
        let start = self.offsets[operator] * self.n_subcarriers;
        let end = start + self.users[operator] * self.n_subcarriers;
        self.gains[start..end].iter().sum::<f64>() / (end - start) as f64
    }
}

/// Draws one snapshot of independent frequency-selective Rayleigh fading for
/// every user of every operator.
///
/// Each user gets `n_paths` circular Gaussian taps with variances from the
/// normalized profile; `z` at a subcarrier is the tap DFT at its center
/// frequency and `h = |z|² / (N0 Δ_sub)`.
pub fn sample_channel(
    grid: &GridSpec,
    profile: &ChannelProfile,
    users_per_operator: &[usize],
    seed: u64,
) -> Result<ChannelRealization, ChannelError> {
    profile.validate()?;
    if users_per_operator.is_empty() || users_per_operator.contains(&0) {
        return Err(ChannelError::NoUsers);
    }
    let n_sub = grid.n_subcarriers();
    let powers = profile.normalized_path_powers();
    let delays = profile.path_delays();
    let n_paths = powers.len();

    // steering[i * n_paths + l] = exp(-j 2π f_i τ_l)
    let steering: Vec<Complex64> = (0..n_sub)
        .flat_map(|i| {
            let f = grid.center_frequency(i).expect("index within grid");
            delays.iter().map(move |tau| Complex64::from_polar(1.0, -2.0 * PI * f * tau))
        })
        .collect();
    let scale: Vec<f64> = powers.iter().map(|p| (p / 2.0).sqrt()).collect();
    let noise = profile.noise_psd * grid.spacing();

    let total_users: usize = users_per_operator.iter().sum();
    let mut gains = Vec::with_capacity(total_users * n_sub);
    let mut offsets = Vec::with_capacity(users_per_operator.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taps = vec![Complex64::new(0.0, 0.0); n_paths];

    for &k in users_per_operator {
        offsets.push(gains.len() / n_sub);
        for _ in 0..k {
            draw_taps(&mut rng, &scale, &mut taps);
            for i in 0..n_sub {
                let row = &steering[i * n_paths..(i + 1) * n_paths];
                let z: Complex64 = taps.iter().zip(row).map(|(a, e)| a * e).sum();
                gains.push((z.norm_sqr() / noise).max(f64::MIN_POSITIVE));
            }
        }
    }

    Ok(ChannelRealization {
        gains,
        users: users_per_operator.to_vec(),
        offsets,
        n_subcarriers: n_sub,
        seed,
    })
}

fn draw_taps(rng: &mut ChaCha8Rng, scale: &[f64], taps: &mut [Complex64]) {
    for (tap, s) in taps.iter_mut().zip(scale) {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *tap = Complex64::new(re * s, im * s);
    }
}

/// The complex tap gains behind [`sample_channel`]: row `i` holds the taps of
/// the `i`-th user in operator-major order, for the same seed.
pub fn sample_taps(profile: &ChannelProfile, n_users: usize, seed: u64) -> Result<Vec<Vec<Complex64>>, ChannelError> {
    profile.validate()?;
    let scale: Vec<f64> = profile.normalized_path_powers().iter().map(|p| (p / 2.0).sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taps = vec![Complex64::new(0.0, 0.0); scale.len()];
    Ok((0..n_users)
        .map(|_| {
            draw_taps(&mut rng, &scale, &mut taps);
            taps.clone()
        })
        .collect())
}

/// Achievable spectral efficiency `log2(1 + p·h)` of one subcarrier.
pub fn subcarrier_rate(power: f64, gain: f64) -> f64 {
    (power * gain).ln_1p() / LN_2
}

/// Converts dBm/Hz to W/Hz.
pub fn dbm_per_hz_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_grid_spacing() {
        let grid = GridSpec::contiguous(10e6, 512).unwrap();
        assert_eq!(grid.spacing(), 19531.25);
        assert_eq!(grid.segments().len(), 1);
        assert_eq!(grid.segments()[0].len, 512);
    }

    #[test]
    fn split_grid_needs_aligned_segments() {
        let err = GridSpec::build(10e6, 512, &[(0.0, 6e6), (6e6, 4e6)]).unwrap_err();
        assert!(matches!(err, ChannelError::SegmentNotAligned { index: 0, .. }));

        let grid = GridSpec::build(10e6, 512, &[(0.0, 5e6), (20e6, 5e6)]).unwrap();
        let segs = grid.segments();
        assert_eq!((segs[0].first_index, segs[0].len), (0, 256));
        assert_eq!((segs[1].first_index, segs[1].len), (256, 256));
        assert_eq!(grid.segment_of(255), Some(0));
        assert_eq!(grid.segment_of(256), Some(1));
        assert!(grid.center_frequency(256).unwrap() > 20e6);
    }

    #[test]
    fn single_subcarrier_grid() {
        let grid = GridSpec::contiguous(1.0, 1).unwrap();
        assert_eq!(grid.spacing(), 1.0);
        assert_eq!(grid.center_frequency(0), Some(0.5));
        assert_eq!(grid.center_frequency(1), None);
    }

    #[test]
    fn grid_rejects_bad_inputs() {
        assert_eq!(GridSpec::contiguous(0.0, 4), Err(ChannelError::ZeroBandwidth(0.0)));
        assert_eq!(GridSpec::contiguous(1e6, 0), Err(ChannelError::NoSubcarriers));
        assert!(matches!(
            GridSpec::build(1e6, 4, &[(0.0, 5e5)]),
            Err(ChannelError::WidthMismatch { .. })
        ));
        assert_eq!(
            GridSpec::build(1e6, 4, &[(1e6, 5e5), (0.0, 5e5)]),
            Err(ChannelError::SegmentOrder(1))
        );
    }

    #[test]
    fn frequency_map_round_trips() {
        let grid = GridSpec::build(8e6, 64, &[(0.0, 2e6), (3e6, 6e6)]).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..grid.n_subcarriers() {
            let f = grid.center_frequency(i).unwrap();
            assert!(f > prev);
            prev = f;
            assert_eq!(grid.index_at(f), Some(i));
        }
        assert_eq!(grid.index_at(2.5e6), None);
    }

    #[test]
    fn reference_profile_matches_table() {
        let profile = ChannelProfile::default();
        assert_eq!(profile.n_paths(), 6);
        let p = profile.normalized_path_powers();
        for (l, db) in REFERENCE_PATH_POWERS_DB.iter().enumerate() {
            let rel = 10.0 * (p[l] / p[0]).log10();
            assert!((rel - db).abs() < 0.01, "path {l}: {rel} vs {db}");
        }
        for (l, tau) in profile.path_delays().into_iter().enumerate() {
            assert!((tau - l as f64 * 1e-6).abs() < 1e-18);
        }
    }

    #[test]
    fn exponential_profile_decays() {
        let profile = ChannelProfile::exponential(4, 0.5);
        for (l, db) in profile.path_powers_db.iter().enumerate() {
            let expected = 10.0 * (-0.5 * l as f64).exp().log10();
            assert!((db - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_validation() {
        let mut p = ChannelProfile::default();
        p.noise_psd = 0.0;
        assert!(p.validate().is_err());
        let mut p = ChannelProfile::default();
        p.path_powers_db.clear();
        assert!(p.validate().is_err());
        let mut p = ChannelProfile::default();
        p.decay_factor = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let grid = GridSpec::contiguous(1e6, 32).unwrap();
        let profile = ChannelProfile::default();
        let a = sample_channel(&grid, &profile, &[2, 3], 11).unwrap();
        let b = sample_channel(&grid, &profile, &[2, 3], 11).unwrap();
        let c = sample_channel(&grid, &profile, &[2, 3], 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.n_users(1), 3);
        assert!(a.user_gains(1, 2).iter().all(|g| g.is_finite() && *g > 0.0));
    }

    #[test]
    fn sampling_rejects_empty_operator() {
        let grid = GridSpec::contiguous(1e6, 8).unwrap();
        let profile = ChannelProfile::default();
        assert_eq!(sample_channel(&grid, &profile, &[], 0), Err(ChannelError::NoUsers));
        assert_eq!(sample_channel(&grid, &profile, &[1, 0], 0), Err(ChannelError::NoUsers));
    }

    #[test]
    fn rate_examples() {
        assert_eq!(subcarrier_rate(0.0, 5.0), 0.0);
        assert!((subcarrier_rate(1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((subcarrier_rate(3.0, 1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn noise_conversion() {
        assert!((dbm_per_hz_to_watts(-170.0) / 1e-20 - 1.0).abs() < 1e-12);
    }
}
