use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::model::ChannelParams;

/// One evaluated metric, as serialized by the CLI and the FFI layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub constellation_hash: String,
    pub sigma_p2: f64,
    pub eb_n0_db: Option<f64>,
    pub n0: f64,
    pub metric: String,
    pub value: f64,
    pub error_estimate: Option<f64>,
    pub flags: Vec<String>,
}

impl MetricReport {
    pub fn new(c: &Constellation, params: &ChannelParams, metric: impl Into<String>, value: f64) -> Self {
        MetricReport {
            constellation_hash: c.content_hash(),
            sigma_p2: params.sigma_p2,
            eb_n0_db: params.eb_n0_db,
            n0: params.n0,
            metric: metric.into(),
            value,
            error_estimate: None,
            flags: Vec::new(),
        }
    }

    pub fn with_error_estimate(mut self, e: f64) -> Self {
        self.error_estimate = Some(e);
        self
    }

    pub fn with_flag(mut self, flag: impl Into<String>) -> Self {
        self.flags.push(flag.into());
        self
    }
}
