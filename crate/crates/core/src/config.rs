//! Scenario configuration.
//!
//! Files are flat `key = value` text (TOML syntax) with one section per
//! protocol. Every key is optional; missing keys take the reference-scenario
//! defaults. Unknown keys are rejected.
//!
//! ```toml
//! protocol = "batman"
//! nodes = 15
//! lambda = 0.9
//!
//! [batman]
//! ogm_interval_ms = 500
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balancer::ForwardingPolicy;
use crate::channel::{mw_to_dbm, ChannelParams, MacParams};
use crate::mobility::Area;
use crate::routing::{BatmanParams, GolsrParams, PathScoreParams, Protocol};
use crate::time::SimTime;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{}invalid `{key}`: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { key: String, line: Option<usize>, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatmanSection {
    pub ogm_interval_ms: u64,
    pub window_size: u32,
    pub hop_penalty: f64,
}

impl Default for BatmanSection {
    fn default() -> Self {
        BatmanSection { ogm_interval_ms: 500, window_size: 8, hop_penalty: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GolsrSection {
    pub hello_interval_ms: u64,
    pub tc_interval_ms: u64,
}

impl Default for GolsrSection {
    fn default() -> Self {
        GolsrSection { hello_interval_ms: 500, tc_interval_ms: 1_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatmobileSection {
    pub ogm_interval_ms: u64,
    pub score_buffer: usize,
    pub mobility_update_ms: u64,
    pub extrapolation_size: usize,
    pub prediction_width: u32,
    pub alpha: f64,
    pub max_trend: f64,
}

impl Default for BatmobileSection {
    fn default() -> Self {
        BatmobileSection {
            ogm_interval_ms: 500,
            score_buffer: 8,
            mobility_update_ms: 250,
            extrapolation_size: 5,
            prediction_width: 15,
            alpha: 7.0,
            max_trend: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Label carried into result rows.
    pub name: String,
    pub protocol: Protocol,
    pub balancing: bool,
    /// Path-quality likelihood factor.
    pub lambda: f64,
    pub exclude_previous_hop: bool,

    pub nodes: usize,
    pub streams: usize,
    pub area_x_m: f64,
    pub area_y_m: f64,
    pub area_z_m: f64,
    pub speed_kmh: f64,

    pub tx_power_mw: f64,
    pub path_loss_exponent: f64,
    pub frequency_hz: f64,
    pub sensitivity_dbm: f64,

    pub bitrate_bps: f64,
    pub mtu_bytes: u32,
    pub stream_start_s: f64,

    pub sim_time_s: f64,
    pub runs: usize,
    pub seed: u64,

    pub window_s: f64,
    pub queue_capacity: usize,
    pub ttl: u8,
    pub mac_rate_bps: f64,
    pub mac_overhead_bytes: u32,
    pub mac_jitter_us: u64,
    pub ranking_expiry_s: f64,

    pub batman: BatmanSection,
    pub golsr: GolsrSection,
    pub batmobile: BatmobileSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "default".into(),
            protocol: Protocol::Batman,
            balancing: true,
            lambda: 0.9,
            exclude_previous_hop: true,
            nodes: 15,
            streams: 1,
            area_x_m: 500.0,
            area_y_m: 500.0,
            area_z_m: 10.0,
            speed_kmh: 50.0,
            tx_power_mw: 100.0,
            path_loss_exponent: 2.75,
            frequency_hz: 2.4e9,
            sensitivity_dbm: -83.0,
            bitrate_bps: 2e6,
            mtu_bytes: 1460,
            stream_start_s: 5.0,
            sim_time_s: 600.0,
            runs: 25,
            seed: 1,
            window_s: 1.0,
            queue_capacity: 50,
            ttl: 16,
            mac_rate_bps: 24e6,
            mac_overhead_bytes: 64,
            mac_jitter_us: 200,
            ranking_expiry_s: 3.0,
            batman: BatmanSection::default(),
            golsr: GolsrSection::default(),
            batmobile: BatmobileSection::default(),
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), line: None, message: message.into() }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(describe_toml_error(text, &e)))?;
        cfg.validate().map_err(|e| attach_line(e, text))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut cfg = Self::from_toml_str(&text)?;
        if !text.lines().any(|l| l.trim_start().starts_with("name")) {
            if let Some(stem) = path.file_stem() {
                cfg.name = stem.to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(key, format!("must be a positive number, got {v}")))
            }
        };
        if self.nodes < 2 {
            return Err(invalid("nodes", format!("need at least 2 nodes, got {}", self.nodes)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(invalid("lambda", format!("must be >= 0, got {}", self.lambda)));
        }
        if self.streams == 0 {
            return Err(invalid("streams", "need at least one stream"));
        }
        if 2 * self.streams > self.nodes {
            return Err(invalid(
                "streams",
                format!("{} disjoint streams need {} nodes, have {}", self.streams, 2 * self.streams, self.nodes),
            ));
        }
        positive("sim_time_s", self.sim_time_s)?;
        positive("window_s", self.window_s)?;
        positive("ranking_expiry_s", self.ranking_expiry_s)?;
        positive("area_x_m", self.area_x_m)?;
        positive("area_y_m", self.area_y_m)?;
        if !(self.area_z_m.is_finite() && self.area_z_m >= 0.0) {
            return Err(invalid("area_z_m", "must be >= 0"));
        }
        if !(self.speed_kmh.is_finite() && self.speed_kmh >= 0.0) {
            return Err(invalid("speed_kmh", "must be >= 0"));
        }
        positive("tx_power_mw", self.tx_power_mw)?;
        positive("frequency_hz", self.frequency_hz)?;
        positive("path_loss_exponent", self.path_loss_exponent)?;
        if self.sensitivity_dbm.is_nan() || self.sensitivity_dbm >= mw_to_dbm(self.tx_power_mw) {
            return Err(invalid("sensitivity_dbm", "must be below the transmit power"));
        }
        positive("bitrate_bps", self.bitrate_bps)?;
        if self.mtu_bytes == 0 {
            return Err(invalid("mtu_bytes", "must be positive"));
        }
        if !(self.stream_start_s >= 0.0 && self.stream_start_s < self.sim_time_s) {
            return Err(invalid("stream_start_s", "must lie in [0, sim_time_s)"));
        }
        if self.queue_capacity == 0 {
            return Err(invalid("queue_capacity", "must be positive"));
        }
        if self.ttl == 0 {
            return Err(invalid("ttl", "must be positive"));
        }
        positive("mac_rate_bps", self.mac_rate_bps)?;
        let ms = |key: &str, v: u64| if v > 0 { Ok(()) } else { Err(invalid(key, "must be positive")) };
        ms("ogm_interval_ms", self.batman.ogm_interval_ms)?;
        ms("hello_interval_ms", self.golsr.hello_interval_ms)?;
        ms("tc_interval_ms", self.golsr.tc_interval_ms)?;
        ms("ogm_interval_ms", self.batmobile.ogm_interval_ms)?;
        ms("mobility_update_ms", self.batmobile.mobility_update_ms)?;
        if !(1..=32).contains(&self.batman.window_size) {
            return Err(invalid("window_size", "must be in 1..=32"));
        }
        if !(self.batman.hop_penalty > 0.0 && self.batman.hop_penalty <= 1.0) {
            return Err(invalid("hop_penalty", "must be in (0, 1]"));
        }
        if self.batmobile.score_buffer == 0 {
            return Err(invalid("score_buffer", "must be positive"));
        }
        if self.batmobile.extrapolation_size < 2 {
            return Err(invalid("extrapolation_size", "must be at least 2"));
        }
        if !(0.0..=8.0).contains(&self.batmobile.alpha) {
            return Err(invalid("alpha", "must be in [0, 8]"));
        }
        if self.batmobile.max_trend.is_nan() || self.batmobile.max_trend < 0.0 {
            return Err(invalid("max_trend", "must be >= 0"));
        }
        Ok(())
    }

    pub fn area(&self) -> Area {
        Area::new(self.area_x_m, self.area_y_m, self.area_z_m)
    }

    pub fn speed_mps(&self) -> f64 {
        self.speed_kmh / 3.6
    }

    pub fn channel_params(&self) -> ChannelParams {
        ChannelParams {
            tx_power_dbm: mw_to_dbm(self.tx_power_mw),
            gamma: self.path_loss_exponent,
            frequency_hz: self.frequency_hz,
            sensitivity_dbm: self.sensitivity_dbm,
        }
    }

    pub fn mac_params(&self) -> MacParams {
        MacParams {
            rate_bps: self.mac_rate_bps,
            header_overhead_bytes: self.mac_overhead_bytes,
            max_jitter: SimTime::from_micros(self.mac_jitter_us),
            queue_capacity: self.queue_capacity,
        }
    }

    pub fn batman_params(&self) -> BatmanParams {
        BatmanParams {
            ogm_interval: SimTime::from_millis(self.batman.ogm_interval_ms),
            window_size: self.batman.window_size,
            hop_penalty: self.batman.hop_penalty,
            ttl: self.ttl,
        }
    }

    pub fn golsr_params(&self) -> GolsrParams {
        GolsrParams {
            hello_interval: SimTime::from_millis(self.golsr.hello_interval_ms),
            tc_interval: SimTime::from_millis(self.golsr.tc_interval_ms),
            diagonal: self.area().diagonal(),
            hold_time: self.ranking_expiry(),
            ttl: self.ttl,
        }
    }

    pub fn pathscore_params(&self) -> PathScoreParams {
        let b = &self.batmobile;
        PathScoreParams {
            ogm_interval: SimTime::from_millis(b.ogm_interval_ms),
            score_buffer: b.score_buffer,
            mobility_update: SimTime::from_millis(b.mobility_update_ms),
            extrapolation_size: b.extrapolation_size,
            prediction_width: b.prediction_width,
            alpha: b.alpha,
            max_trend: b.max_trend,
            range: self.channel_params().max_range(),
            ttl: self.ttl,
        }
    }

    pub fn mobility_update(&self) -> SimTime {
        SimTime::from_millis(self.batmobile.mobility_update_ms)
    }

    pub fn ranking_expiry(&self) -> SimTime {
        SimTime::from_secs_f64(self.ranking_expiry_s)
    }

    pub fn sim_time(&self) -> SimTime {
        SimTime::from_secs_f64(self.sim_time_s)
    }

    pub fn window(&self) -> SimTime {
        SimTime::from_secs_f64(self.window_s)
    }

    pub fn policy(&self) -> ForwardingPolicy {
        if self.balancing {
            ForwardingPolicy::Balanced { lambda: self.lambda, exclude_previous_hop: self.exclude_previous_hop }
        } else {
            ForwardingPolicy::Plain
        }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn describe_toml_error(text: &str, err: &toml::de::Error) -> String {
    let msg = err.message().trim_end();
    match err.span() {
        Some(span) => format!("line {}: {}", line_of_offset(text, span.start), msg),
        None => msg.to_string(),
    }
}

/// Finds the line assigning `key` for validation errors.
fn attach_line(err: ConfigError, text: &str) -> ConfigError {
    match err {
        ConfigError::Invalid { key, line: None, message } => {
            let line = text.lines().position(|l| {
                let l = l.trim_start();
                l.strip_prefix(key.as_str())
                    .is_some_and(|rest| rest.trim_start().starts_with('='))
            });
            ConfigError::Invalid { key, line: line.map(|i| i + 1), message }
        }
        other => other,
    }
}
