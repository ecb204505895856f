use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// A monotone grid with named real-valued channels of equal length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    grid_name: String,
    grid: Vec<f64>,
    channels: Vec<(String, Vec<f64>)>,
}

impl TimeSeries {
    pub fn new(grid_name: impl Into<String>, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
        }
        Ok(Self { grid_name: grid_name.into(), grid, channels: Vec::new() })
    }

    pub fn grid_name(&self) -> &str {
        &self.grid_name
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Adds or replaces a channel.
    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.grid.len() {
            return Err(Error::DimensionMismatch { expected: self.grid.len(), found: values.len() });
        }
        let name = name.into();
        match self.channels.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = values,
            None => self.channels.push((name, values)),
        }
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.insert(name, values)?;
        Ok(self)
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|(n, _)| n.as_str())
    }

    pub fn channels(&self) -> &[(String, Vec<f64>)] {
        &self.channels
    }

    /// Copies every channel of `other` (same grid) into `self` with a name
    /// suffix.
    pub fn merge_suffixed(&mut self, other: &TimeSeries, suffix: &str) -> Result<()> {
        if other.grid != self.grid {
            return Err(Error::InvalidParameter("cannot merge series on different grids".into()));
        }
        for (name, values) in &other.channels {
            self.insert(format!("{name}{suffix}"), values.clone())?;
        }
        Ok(())
    }

    /// Writes the series as CSV: header row, grid first, one column per
    /// channel, 17 significant digits, LF line endings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "{}", self.grid_name)?;
        for (name, _) in &self.channels {
            write!(out, ",{name}")?;
        }
        out.write_all(b"\n")?;
        for (row, t) in self.grid.iter().enumerate() {
            write!(out, "{}", format_float(*t))?;
            for (_, values) in &self.channels {
                write!(out, ",{}", format_float(values[row]))?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// `steps` points uniformly covering `[0, max]`.
pub fn uniform_grid(max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 grid points, got {steps}")));
    }
    if !(max.is_finite() && max > 0.0) {
        return Err(Error::InvalidParameter(format!("grid end must be positive, got {max}")));
    }
    let h = max / (steps - 1) as f64;
    Ok((0..steps).map(|k| if k == steps - 1 { max } else { k as f64 * h }).collect())
}

/// `steps` points uniformly covering `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (steps - 1) as f64;
            (0..steps).map(|k| if k == steps - 1 { hi } else { lo + k as f64 * h }).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let ts = TimeSeries::new("tau", vec![0.0, 0.5]).unwrap().with("a", vec![1.0, 0.25]).unwrap();
        let csv = ts.to_csv_string();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "tau,a");
        assert_eq!(lines.len(), 3);
        assert!(!csv.contains('\r'));
        let back: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(back, 0.25);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(TimeSeries::new("t", vec![]), Err(Error::EmptyGrid)));
        assert!(TimeSeries::new("t", vec![0.0, 0.0]).is_err());
        assert!(uniform_grid(1.0, 1).is_err());
        assert!(uniform_grid(0.0, 5).is_err());
    }

    #[test]
    fn channel_length_checked() {
        let mut ts = TimeSeries::new("t", vec![0.0, 1.0]).unwrap();
        assert!(ts.insert("x", vec![1.0]).is_err());
    }

    #[test]
    fn uniform_grid_endpoints() {
        let g = uniform_grid(20.0, 2001).unwrap();
        assert_eq!(g.len(), 2001);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[2000], 20.0);
        assert!((g[1] - 0.01).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn float_format_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let s = format_float(x);
            proptest::prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
