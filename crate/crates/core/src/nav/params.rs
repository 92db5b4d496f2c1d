use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::NavError;

/// Keys of the eight planner knobs, in canonical order.
pub const PARAM_KEYS: [&str; 8] = [
    "max_vel_x",
    "max_vel_theta",
    "vx_samples",
    "vtheta_samples",
    "occdist_scale",
    "pdist_scale",
    "gdist_scale",
    "inflation_radius",
];

/// One configuration of the local planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub max_vel_x: f64,
    pub max_vel_theta: f64,
    pub vx_samples: u32,
    pub vtheta_samples: u32,
    pub occdist_scale: f64,
    pub pdist_scale: f64,
    pub gdist_scale: f64,
    pub inflation_radius: f64,
}

impl Default for ParameterSet {
    /// The hand-tuned defaults.
    fn default() -> Self {
        Self {
            max_vel_x: 0.50,
            max_vel_theta: 1.57,
            vx_samples: 6,
            vtheta_samples: 20,
            occdist_scale: 0.10,
            pdist_scale: 0.75,
            gdist_scale: 1.00,
            inflation_radius: 0.30,
        }
    }
}

impl ParameterSet {
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.max_vel_x,
            self.max_vel_theta,
            self.vx_samples as f64,
            self.vtheta_samples as f64,
            self.occdist_scale,
            self.pdist_scale,
            self.gdist_scale,
            self.inflation_radius,
        ]
    }

    /// Builds a set from raw knob values; sample counts are rounded to the
    /// nearest integer and floored at 1.
    pub fn from_array(v: [f64; 8]) -> Self {
        let count = |x: f64| x.round().max(1.0) as u32;
        Self {
            max_vel_x: v[0],
            max_vel_theta: v[1],
            vx_samples: count(v[2]),
            vtheta_samples: count(v[3]),
            occdist_scale: v[4],
            pdist_scale: v[5],
            gdist_scale: v[6],
            inflation_radius: v[7],
        }
    }

    /// Flat `key=value` lines in canonical key order.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (k, line) in PARAM_KEYS.iter().zip(self.value_strings()) {
            out.push_str(k);
            out.push('=');
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    fn value_strings(&self) -> [String; 8] {
        [
            self.max_vel_x.to_string(),
            self.max_vel_theta.to_string(),
            self.vx_samples.to_string(),
            self.vtheta_samples.to_string(),
            self.occdist_scale.to_string(),
            self.pdist_scale.to_string(),
            self.gdist_scale.to_string(),
            self.inflation_radius.to_string(),
        ]
    }

    /// Parses `key=value` lines. Every key must appear exactly once; blank
    /// lines and `#` comments are ignored.
    pub fn from_kv(text: &str) -> Result<Self, NavError> {
        let mut vals: [Option<f64>; 8] = [None; 8];
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| NavError::BadParameters(format!("line {}: missing '='", n + 1)))?;
            let idx = PARAM_KEYS
                .iter()
                .position(|key| *key == k.trim())
                .ok_or_else(|| NavError::BadParameters(format!("unknown key {:?}", k.trim())))?;
            if vals[idx].is_some() {
                return Err(NavError::BadParameters(format!("duplicate key {}", PARAM_KEYS[idx])));
            }
            let parsed: f64 = v
                .trim()
                .parse()
                .map_err(|_| NavError::BadParameters(format!("bad value for {}", PARAM_KEYS[idx])))?;
            if !parsed.is_finite() {
                return Err(NavError::BadParameters(format!("non-finite {}", PARAM_KEYS[idx])));
            }
            vals[idx] = Some(parsed);
        }
        let mut arr = [0.0; 8];
        for (i, v) in vals.iter().enumerate() {
            arr[i] = v.ok_or_else(|| NavError::BadParameters(format!("missing {}", PARAM_KEYS[i])))?;
        }
        for i in [2, 3] {
            if arr[i].fract() != 0.0 || arr[i] < 1.0 {
                return Err(NavError::BadParameters(format!(
                    "{} must be a positive integer",
                    PARAM_KEYS[i]
                )));
            }
        }
        Ok(Self::from_array(arr))
    }
}

impl fmt::Display for ParameterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "v={:.2} w={:.2} s={} t={} o={:.2} p={:.2} g={:.2} i={:.2}",
            self.max_vel_x,
            self.max_vel_theta,
            self.vx_samples,
            self.vtheta_samples,
            self.occdist_scale,
            self.pdist_scale,
            self.gdist_scale,
            self.inflation_radius
        )
    }
}

impl FromStr for ParameterSet {
    type Err = NavError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_kv(s)
    }
}

/// Box bounds for every knob; sample counts are integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub lower: [f64; 8],
    pub upper: [f64; 8],
    pub integral: [bool; 8],
    pub default: ParameterSet,
}

impl Default for ParameterSpace {
    fn default() -> Self {
        Self {
            lower: [0.10, 0.314, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0],
            upper: [2.00, 3.14, 20.0, 60.0, 1.0, 1.0, 1.0, 0.40],
            integral: [false, false, true, true, false, false, false, false],
            default: ParameterSet::default(),
        }
    }
}

impl ParameterSpace {
    pub const DIM: usize = 8;

    pub fn validate(&self) -> Result<(), NavError> {
        for i in 0..Self::DIM {
            if !(self.lower[i] < self.upper[i]) {
                return Err(NavError::BadParameters(format!(
                    "empty range for {}",
                    PARAM_KEYS[i]
                )));
            }
        }
        if !self.contains(&self.default) {
            return Err(NavError::BadParameters("default outside the space".into()));
        }
        Ok(())
    }

    pub fn contains(&self, p: &ParameterSet) -> bool {
        p.to_array()
            .iter()
            .enumerate()
            .all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }

    /// Maps a parameter set into the unit cube.
    pub fn encode(&self, p: &ParameterSet) -> Vec<f64> {
        p.to_array()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.lower[i]) / (self.upper[i] - self.lower[i]))
            .collect()
    }

    /// Inverse of [`encode`](Self::encode); coordinates are clipped to the
    /// cube and integral knobs rounded to the nearest integer.
    pub fn decode(&self, z: &[f64]) -> ParameterSet {
        let mut arr = [0.0; 8];
        for i in 0..Self::DIM {
            let u = z[i].clamp(0.0, 1.0);
            let mut v = self.lower[i] + u * (self.upper[i] - self.lower[i]);
            if self.integral[i] {
                v = v.round().clamp(self.lower[i].ceil(), self.upper[i].floor());
            }
            arr[i] = v;
        }
        ParameterSet::from_array(arr)
    }
}
