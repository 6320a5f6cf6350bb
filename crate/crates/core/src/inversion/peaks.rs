//! Surface peaks of the difference traces on the interior curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::TraceData;
use crate::mesh::Point;

/// Indicator ratio max/min below which the input counts as flat.
pub const FLAT_RATIO: f64 = 1.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub point: Point,
    /// Outward unit normal of the curve at `point`.
    pub normal: Point,
    pub height: f64,
}

impl Peak {
    /// `x̂ − d·n̂`.
    pub fn at_depth(&self, d: f64) -> Point {
        [self.point[0] - d * self.normal[0], self.point[1] - d * self.normal[1]]
    }

    pub fn angle(&self) -> f64 {
        self.point[1].atan2(self.point[0])
    }
}

/// Peaks sorted by decreasing height.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
    /// Smoothed indicator per curve sample, in the order of the trace.
    pub indicator: Vec<f64>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }
}

/// `P = Σ_m |trace_m|²` per sample, smoothed by a 3-point moving average
/// along the closed curve. Local maxima above `rel_threshold·max` are
/// peaks.
pub fn locate_peaks(traces: &TraceData, rel_threshold: f64) -> Result<PeakSet> {
    let n = traces.num_points();
    if n < 3 || traces.num_waves() == 0 {
        return Err(Error::NoPeak("too few trace samples".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let angles = traces.angles();
    order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]));
    let raw: Vec<f64> = order
        .iter()
        .map(|&i| traces.waves.iter().map(|w| w[i].norm_sqr()).sum())
        .collect();
    let smooth: Vec<f64> = (0..n)
        .map(|i| (raw[(i + n - 1) % n] + raw[i] + raw[(i + 1) % n]) / 3.0)
        .collect();
    let max = smooth.iter().cloned().fold(0.0, f64::max);
    let min = smooth.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) {
        return Err(Error::NoPeak("all difference traces vanish".into()));
    }
    if max < FLAT_RATIO * min {
        return Err(Error::NoPeak(format!("flat indicator (max/min = {:.3})", max / min)));
    }
    let mut peaks = Vec::new();
    for i in 0..n {
        let (prev, next) = (smooth[(i + n - 1) % n], smooth[(i + 1) % n]);
        if smooth[i] > prev && smooth[i] >= next && smooth[i] >= rel_threshold * max {
            let p = traces.midpoints[order[i]];
            let r = p[0].hypot(p[1]);
            peaks.push(Peak {
                point: p,
                normal: [p[0] / r, p[1] / r],
                height: smooth[i],
            });
        }
    }
    peaks.sort_by(|a, b| b.height.total_cmp(&a.height));
    let mut indicator = vec![0.0; n];
    for (k, &i) in order.iter().enumerate() {
        indicator[i] = smooth[k];
    }
    Ok(PeakSet { peaks, indicator })
}
