use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::channel::{dbm_per_hz_to_watts, ChannelProfile, GridSpec, REFERENCE_PATH_POWERS_DB};
use crate::interop::SharingPolicy;

/// A count or a sweep list; both forms are accepted in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CountOrList {
    One(usize),
    Many(Vec<usize>),
}

impl CountOrList {
    pub fn values(&self) -> Vec<usize> {
        match self {
            CountOrList::One(n) => vec![*n],
            CountOrList::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub bandwidth_hz: f64,
    pub subcarriers: usize,
    /// `[start_hz, width_hz]` pairs; empty means one contiguous band.
    pub segments: Vec<[f64; 2]>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { bandwidth_hz: 10e6, subcarriers: 512, segments: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub path_powers_db: Vec<f64>,
    pub decay_factor: f64,
    pub max_delay_spread_s: f64,
    pub max_doppler_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            path_powers_db: REFERENCE_PATH_POWERS_DB.to_vec(),
            decay_factor: 1.0,
            max_delay_spread_s: 5e-6,
            max_doppler_hz: 30.0,
            noise_psd_dbm_per_hz: -170.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// Agreed weights; empty means equal shares. A non-empty list fixes the
    /// operator count.
    pub rho: Vec<f64>,
    /// Fragment position codes, one per operator; negative means no
    /// preference. Empty means no preferences at all.
    pub alpha_pref: Vec<i64>,
    /// Smallest fragment any operator accepts, in subcarriers.
    pub min_fragment_subcarriers: usize,
    /// Subcarriers lost at every fragment edge facing another operator.
    pub guard_subcarriers: usize,
    /// Per-operator total rate targets in bits/s/Hz; empty means every
    /// operator is overloaded and asks for the whole grid.
    pub rate_targets: Vec<f64>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            rho: Vec::new(),
            alpha_pref: Vec::new(),
            min_fragment_subcarriers: 1,
            guard_subcarriers: 0,
            rate_targets: Vec::new(),
        }
    }
}

/// Sweep axes of the users-per-operator experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiversityConfig {
    pub operators: CountOrList,
    pub users_per_operator: CountOrList,
}

impl Default for DiversityConfig {
    fn default() -> Self {
        Self {
            operators: CountOrList::One(3),
            users_per_operator: CountOrList::Many(vec![1, 2, 3, 5, 8, 12, 20, 32, 50, 80, 120, 170]),
        }
    }
}

/// Generator for the intra-operator experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntraopConfig {
    pub users: usize,
    pub ndc_users: usize,
    pub subcarriers: usize,
    /// bits/s/Hz, one per DC user.
    pub dc_targets: Vec<f64>,
    pub p_max_dbm: Vec<f64>,
}

impl Default for IntraopConfig {
    fn default() -> Self {
        Self {
            users: 4,
            ndc_users: 2,
            subcarriers: 8,
            dc_targets: vec![1.4, 1.6],
            p_max_dbm: vec![-85.0, -80.0, -75.0, -70.0, -65.0],
        }
    }
}

/// Everything an experiment run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub trials: usize,
    pub operators: CountOrList,
    pub users_per_operator: CountOrList,
    /// W per operator.
    pub p_max_per_operator: f64,
    /// Worker threads; 0 uses the available parallelism. Never affects output.
    pub threads: usize,
    /// Fill the wall-time column. Off by default so outputs are reproducible.
    pub record_wall_time: bool,
    pub grid: GridConfig,
    pub profile: ProfileConfig,
    pub policy: PolicyConfig,
    pub diversity: DiversityConfig,
    pub intraop: IntraopConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            trials: 100,
            operators: CountOrList::Many(vec![2, 3, 4, 5, 6]),
            users_per_operator: CountOrList::One(20),
            p_max_per_operator: 4.0,
            threads: 0,
            record_wall_time: false,
            grid: GridConfig::default(),
            profile: ProfileConfig::default(),
            policy: PolicyConfig::default(),
            diversity: DiversityConfig::default(),
            intraop: IntraopConfig::default(),
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config { field: field.to_string(), message: message.into() }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Parse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        check_sweep("operators", &self.operators)?;
        check_sweep("users_per_operator", &self.users_per_operator)?;
        check_sweep("diversity.operators", &self.diversity.operators)?;
        check_sweep("diversity.users_per_operator", &self.diversity.users_per_operator)?;
        if !(self.p_max_per_operator > 0.0 && self.p_max_per_operator.is_finite()) {
            return Err(invalid("p_max_per_operator", "must be a positive number of watts"));
        }
        self.grid_spec()?;
        self.channel_profile()?;

        let p = &self.policy;
        if p.rho.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(invalid("policy.rho", "weights must be positive"));
        }
        if p.min_fragment_subcarriers == 0 {
            return Err(invalid("policy.min_fragment_subcarriers", "must be at least 1"));
        }
        if p.alpha_pref.iter().any(|&a| a > u32::MAX as i64) {
            return Err(invalid("policy.alpha_pref", "codes must fit in 32 bits"));
        }
        if p.rate_targets.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(invalid("policy.rate_targets", "targets must be non-negative"));
        }
        for n in self.operators.values().into_iter().chain(self.diversity.operators.values()) {
            for (field, len) in
                [("policy.rho", p.rho.len()), ("policy.alpha_pref", p.alpha_pref.len()), ("policy.rate_targets", p.rate_targets.len())]
            {
                if len != 0 && len != n {
                    return Err(invalid(field, format!("has {len} entries but the sweep includes {n} operators")));
                }
            }
        }

        let io = &self.intraop;
        if io.users == 0 || io.subcarriers == 0 {
            return Err(invalid("intraop", "users and subcarriers must be at least 1"));
        }
        if io.ndc_users == 0 || io.ndc_users > io.users {
            return Err(invalid("intraop.ndc_users", format!("must be in 1..={}", io.users)));
        }
        if io.dc_targets.len() != io.users - io.ndc_users {
            return Err(invalid(
                "intraop.dc_targets",
                format!("needs {} entries, one per DC user", io.users - io.ndc_users),
            ));
        }
        if io.dc_targets.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(invalid("intraop.dc_targets", "targets must be non-negative"));
        }
        if io.p_max_dbm.is_empty() {
            return Err(invalid("intraop.p_max_dbm", "sweep list is empty"));
        }
        if io.p_max_dbm.iter().any(|p| !p.is_finite()) {
            return Err(invalid("intraop.p_max_dbm", "values must be finite"));
        }
        GridSpec::contiguous(self.grid.bandwidth_hz, io.subcarriers)
            .map_err(|e| invalid("intraop.subcarriers", e.to_string()))?;
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec, HarnessError> {
        let g = &self.grid;
        let built = if g.segments.is_empty() {
            GridSpec::contiguous(g.bandwidth_hz, g.subcarriers)
        } else {
            let segs: Vec<(f64, f64)> = g.segments.iter().map(|s| (s[0], s[1])).collect();
            GridSpec::build(g.bandwidth_hz, g.subcarriers, &segs)
        };
        built.map_err(|e| invalid("grid", e.to_string()))
    }

    pub fn channel_profile(&self) -> Result<ChannelProfile, HarnessError> {
        let p = &self.profile;
        let profile = ChannelProfile {
            path_powers_db: p.path_powers_db.clone(),
            decay_factor: p.decay_factor,
            max_delay_spread: p.max_delay_spread_s,
            max_doppler: p.max_doppler_hz,
            noise_psd: dbm_per_hz_to_watts(p.noise_psd_dbm_per_hz),
        };
        profile.validate().map_err(|e| invalid("profile", e.to_string()))?;
        Ok(profile)
    }

    /// Sharing policy for `n` operators.
    pub fn sharing_policy(&self, n: usize) -> Result<SharingPolicy, HarnessError> {
        let p = &self.policy;
        let rho = if p.rho.is_empty() { vec![1.0 / n as f64; n] } else { p.rho.clone() };
        let alpha = if p.alpha_pref.is_empty() {
            vec![None; n]
        } else {
            p.alpha_pref.iter().map(|&a| u32::try_from(a).ok()).collect()
        };
        SharingPolicy::new(rho, alpha, vec![p.min_fragment_subcarriers; n])
            .map_err(|e| invalid("policy", e.to_string()))
    }
}

fn check_sweep(field: &str, sweep: &CountOrList) -> Result<(), HarnessError> {
    let values = sweep.values();
    if values.is_empty() {
        return Err(invalid(field, "sweep list is empty"));
    }
    if values.contains(&0) {
        return Err(invalid(field, "values must be at least 1"));
    }
    Ok(())
}

/// `10^{(dBm − 30)/10}` W.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}
