//! Cross-epoch archive of evaluated points and the sample-reuse policies.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, fraction_count, squared_distance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrustRegionPolicy {
    None,
    /// Reuse the `⌊τ·k⌋` archive points nearest to the update target.
    Dynamic { tau: f64 },
    /// Reuse every archive point within radius `R` of the update target.
    Static { radius: f64 },
}

impl TrustRegionPolicy {
    pub fn dynamic(tau: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&tau) {
            return Err(Error::invalid(format!("τ must be in [0, 1), got {tau}")));
        }
        Ok(TrustRegionPolicy::Dynamic { tau })
    }

    pub fn fixed_radius(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("R must be positive, got {radius}")));
        }
        Ok(TrustRegionPolicy::Static { radius })
    }
}

impl Default for TrustRegionPolicy {
    fn default() -> Self {
        TrustRegionPolicy::Dynamic { tau: 0.05 }
    }
}

impl fmt::Display for TrustRegionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrustRegionPolicy::None => f.write_str("none"),
            TrustRegionPolicy::Dynamic { tau } => write!(f, "dynamic:{tau}"),
            TrustRegionPolicy::Static { radius } => write!(f, "static:{radius}"),
        }
    }
}

impl FromStr for TrustRegionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "none" {
            return Ok(TrustRegionPolicy::None);
        }
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("trust region `{s}`: expected none, dynamic:<tau> or static:<R>")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| Error::invalid(format!("trust region parameter `{value}` is not a number")))?;
        match kind {
            "dynamic" => TrustRegionPolicy::dynamic(value),
            "static" => TrustRegionPolicy::fixed_radius(value),
            other => Err(Error::invalid(format!("unknown trust region kind `{other}`"))),
        }
    }
}

/// FIFO store of previously evaluated points and their observed values.
#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    points: VecDeque<DVector<f64>>,
    values: VecDeque<f64>,
    capacity: usize,
}

impl Archive {
    pub fn new(capacity: usize) -> Self {
        Archive {
            points: VecDeque::new(),
            values: VecDeque::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Entries oldest first.
    pub fn entries(&self) -> impl Iterator<Item = (&DVector<f64>, f64)> {
        self.points.iter().zip(self.values.iter().copied())
    }

    pub fn push(&mut self, point: DVector<f64>, value: f64) -> Result<()> {
        if !value.is_finite() || !all_finite(point.as_slice()) {
            return Err(Error::NonFinite("archive entry".into()));
        }
        self.points.push_back(point);
        self.values.push_back(value);
        while self.points.len() > self.capacity {
            self.points.pop_front();
            self.values.pop_front();
        }
        Ok(())
    }
}

/// Archive entries to reuse when estimating the gradient for target `u`.
/// Never more than `k - 1`, so each epoch draws at least one fresh direction.
pub fn select_reuse(
    archive: &Archive,
    target: &DVector<f64>,
    budget: usize,
    policy: &TrustRegionPolicy,
) -> Vec<(DVector<f64>, f64)> {
    let cap = budget.saturating_sub(1);
    if archive.is_empty() || cap == 0 {
        return Vec::new();
    }
    let mut ranked: Vec<(usize, f64)> = archive
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, squared_distance(p, target)))
        .collect();
    // Stable sort keeps insertion order (oldest first) among equal distances.
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    let chosen: Vec<usize> = match policy {
        TrustRegionPolicy::None => return Vec::new(),
        TrustRegionPolicy::Dynamic { tau } => {
            let count = fraction_count(*tau, budget).min(cap);
            ranked.iter().take(count).map(|(i, _)| *i).collect()
        }
        TrustRegionPolicy::Static { radius } => ranked
            .iter()
            .take_while(|(_, d2)| d2.sqrt() <= *radius)
            .take(cap)
            .map(|(i, _)| *i)
            .collect(),
    };
    chosen
        .into_iter()
        .map(|i| (archive.points[i].clone(), archive.values[i]))
        .collect()
}

/// Stores the epoch's center and every regression row `θ_t + z_i` (fresh and
/// reused alike) with its observed value.
pub fn record_epoch(
    archive: &mut Archive,
    center: &DVector<f64>,
    center_value: f64,
    rows: &[(DVector<f64>, f64)],
) -> Result<()> {
    archive.push(center.clone(), center_value)?;
    for (disp, value) in rows {
        archive.push(center + disp, *value)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn two_point_archive() -> Archive {
        let mut a = Archive::new(10);
        a.push(v(&[0.0, 0.0]), 1.0).unwrap();
        a.push(v(&[10.0, 0.0]), 2.0).unwrap();
        a
    }

    #[test]
    fn empty_archive_reuses_nothing() {
        let a = Archive::new(5);
        for policy in [TrustRegionPolicy::None, TrustRegionPolicy::dynamic(0.5).unwrap(), TrustRegionPolicy::fixed_radius(1.0).unwrap()] {
            assert!(select_reuse(&a, &v(&[0.0]), 10, &policy).is_empty());
        }
    }

    #[test]
    fn dynamic_picks_nearest() {
        let a = two_point_archive();
        // τ·k = 0.1·10 = 1 point.
        let chosen = select_reuse(&a, &v(&[0.1, 0.0]), 10, &TrustRegionPolicy::dynamic(0.1).unwrap());
        assert_eq!(chosen, vec![(v(&[0.0, 0.0]), 1.0)]);
    }

    #[test]
    fn static_filters_by_radius() {
        let a = two_point_archive();
        let chosen = select_reuse(&a, &v(&[0.1, 0.0]), 10, &TrustRegionPolicy::fixed_radius(1.0).unwrap());
        assert_eq!(chosen, vec![(v(&[0.0, 0.0]), 1.0)]);
    }

    #[test]
    fn never_more_than_budget_minus_one() {
        let mut a = Archive::new(100);
        for i in 0..20 {
            a.push(v(&[i as f64 * 0.01]), 0.0).unwrap();
        }
        let chosen = select_reuse(&a, &v(&[0.0]), 5, &TrustRegionPolicy::fixed_radius(10.0).unwrap());
        assert_eq!(chosen.len(), 4);
        assert!(select_reuse(&a, &v(&[0.0]), 1, &TrustRegionPolicy::fixed_radius(10.0).unwrap()).is_empty());
    }

    #[test]
    fn ties_prefer_oldest() {
        let mut a = Archive::new(10);
        a.push(v(&[1.0]), 1.0).unwrap();
        a.push(v(&[-1.0]), 2.0).unwrap();
        let chosen = select_reuse(&a, &v(&[0.0]), 10, &TrustRegionPolicy::dynamic(0.1).unwrap());
        assert_eq!(chosen, vec![(v(&[1.0]), 1.0)]);
    }

    #[test]
    fn record_counts_and_fifo() {
        let mut a = Archive::new(100);
        let rows: Vec<_> = (0..3).map(|i| (v(&[i as f64]), i as f64)).collect();
        record_epoch(&mut a, &v(&[5.0]), 9.0, &rows).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a.entries().map(|(p, _)| p[0]).collect::<Vec<_>>(), vec![5.0, 5.0, 6.0, 7.0]);

        let mut small = Archive::new(2);
        record_epoch(&mut small, &v(&[0.0]), 0.0, &rows).unwrap();
        assert_eq!(small.len(), 2);
        assert_eq!(small.entries().map(|(_, r)| r).collect::<Vec<_>>(), vec![1.0, 2.0]);
    }

    #[test]
    fn reused_rows_are_recorded_again() {
        let mut a = Archive::new(100);
        record_epoch(&mut a, &v(&[0.0]), 0.0, &[(v(&[1.0]), 1.0)]).unwrap();
        let reused = select_reuse(&a, &v(&[0.9]), 10, &TrustRegionPolicy::fixed_radius(0.5).unwrap());
        assert_eq!(reused.len(), 1);
        let center = v(&[0.5]);
        let rows: Vec<_> = reused.iter().map(|(p, r)| (p - &center, *r)).collect();
        record_epoch(&mut a, &center, 0.5, &rows).unwrap();
        assert_eq!(a.entries().filter(|(p, _)| p[0] == 1.0).count(), 2);
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("none".parse::<TrustRegionPolicy>().unwrap(), TrustRegionPolicy::None);
        assert_eq!("dynamic:0.05".parse::<TrustRegionPolicy>().unwrap(), TrustRegionPolicy::Dynamic { tau: 0.05 });
        assert_eq!("static:2".parse::<TrustRegionPolicy>().unwrap(), TrustRegionPolicy::Static { radius: 2.0 });
        for bad in ["dynamic:1.0", "static:0", "static", "fancy:1", "dynamic:x"] {
            assert!(bad.parse::<TrustRegionPolicy>().is_err(), "{bad}");
        }
    }

    #[test]
    fn non_finite_entries_rejected() {
        let mut a = Archive::new(3);
        assert!(a.push(v(&[f64::NAN]), 0.0).is_err());
        assert!(a.push(v(&[0.0]), f64::INFINITY).is_err());
        assert!(a.is_empty());
    }
}
