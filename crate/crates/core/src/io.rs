//! CSV formats: current profiles, experiment datasets, OCP tables,
//! simulation results, event logs, and the analysis outputs.
//!
//! Floats are written with Rust's shortest round-trip formatting so that
//! re-reading and re-emitting a file is byte-identical.

use std::path::Path;

use crate::anode::OcpTable;
use crate::cathode::Mode;
use crate::error::{Error, Result};
use crate::simulator::SimulationResult;

/// One experimental (or synthetic) constant-current segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub time_s: Vec<f64>,
    pub current_a: Vec<f64>,
    pub voltage_v: Vec<f64>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        let n = self.time_s.len();
        if n < 2 || self.current_a.len() != n || self.voltage_v.len() != n {
            return Err(Error::Input(format!(
                "dataset needs at least 2 aligned samples, got {n} times, {} currents, {} voltages",
                self.current_a.len(),
                self.voltage_v.len()
            )));
        }
        for w in self.time_s.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Input(format!(
                    "dataset time column must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// Uniform sample spacing, if the grid is uniform.
    pub fn uniform_dt(&self) -> Option<f64> {
        let dt = self.time_s[1] - self.time_s[0];
        for w in self.time_s.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(1.0) {
                return None;
            }
        }
        Some(dt)
    }

    /// Total charge moved over the segment [Ah], from the zero-order-held
    /// current samples.
    pub fn capacity_ah(&self) -> f64 {
        let mut q = 0.0;
        for k in 0..self.time_s.len() - 1 {
            q += self.current_a[k] * (self.time_s[k + 1] - self.time_s[k]);
        }
        (q / 3600.0).abs()
    }

    /// Dominant operating direction of the segment.
    pub fn mode(&self) -> Mode {
        let sum: f64 = self.current_a.iter().sum();
        if sum >= 0.0 {
            Mode::Discharge
        } else {
            Mode::Charge
        }
    }

    /// Resample onto a uniform grid with spacing `dt` covering the same
    /// horizon: current by previous-sample hold, voltage linearly.
    pub fn resample(&self, dt: f64) -> Dataset {
        let t0 = self.time_s[0];
        let t_end = *self.time_s.last().unwrap();
        let n = ((t_end - t0) / dt).floor() as usize;
        let mut time_s = Vec::with_capacity(n + 1);
        let mut current_a = Vec::with_capacity(n + 1);
        let mut voltage_v = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let t = t0 + k as f64 * dt;
            time_s.push(t);
            current_a.push(sample_hold(&self.time_s, &self.current_a, t));
            voltage_v.push(sample_linear(&self.time_s, &self.voltage_v, t));
        }
        Dataset {
            time_s,
            current_a,
            voltage_v,
        }
    }
}

/// Previous-sample hold lookup.
pub fn sample_hold(times: &[f64], values: &[f64], t: f64) -> f64 {
    match times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
        Ok(i) => values[i],
        Err(0) => values[0],
        Err(i) => values[i - 1],
    }
}

/// Linear interpolation lookup (clamped at the ends).
pub fn sample_linear(times: &[f64], values: &[f64], t: f64) -> f64 {
    match times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
        Ok(i) => values[i],
        Err(0) => values[0],
        Err(i) if i >= times.len() => *values.last().unwrap(),
        Err(i) => {
            let w = (t - times[i - 1]) / (times[i] - times[i - 1]);
            values[i - 1] + w * (values[i] - values[i - 1])
        }
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn column_index(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| {
            Error::Input(format!(
                "{}: required column '{name}' not found in header [{}]",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })
}

fn parse_field(record: &csv::StringRecord, idx: usize, line: usize, path: &Path) -> Result<f64> {
    let raw = record.get(idx).ok_or_else(|| {
        Error::Input(format!("{}: line {line}: missing field {idx}", path.display()))
    })?;
    raw.parse::<f64>().map_err(|_| {
        Error::Input(format!(
            "{}: line {line}: cannot parse '{raw}' as a number",
            path.display()
        ))
    })
}

/// Read a current profile CSV with columns (time_s, current_A).
pub fn read_profile(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers()?.clone();
    let t_idx = column_index(&headers, "time_s", path)?;
    let i_idx = column_index(&headers, "current_A", path)?;
    let mut time = Vec::new();
    let mut current = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = k + 2;
        time.push(parse_field(&record, t_idx, line, path)?);
        current.push(parse_field(&record, i_idx, line, path)?);
    }
    if time.len() < 2 {
        return Err(Error::Input(format!(
            "{}: profile needs at least 2 samples",
            path.display()
        )));
    }
    Ok((time, current))
}

/// Read a dataset CSV with columns (time_s, current_A, voltage_V); extra
/// columns are ignored so simulation results can be fed back as datasets.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers()?.clone();
    let t_idx = column_index(&headers, "time_s", path)?;
    let i_idx = column_index(&headers, "current_A", path)?;
    let v_idx = column_index(&headers, "voltage_V", path)?;
    let mut ds = Dataset {
        time_s: Vec::new(),
        current_a: Vec::new(),
        voltage_v: Vec::new(),
    };
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = k + 2;
        ds.time_s.push(parse_field(&record, t_idx, line, path)?);
        ds.current_a.push(parse_field(&record, i_idx, line, path)?);
        ds.voltage_v.push(parse_field(&record, v_idx, line, path)?);
    }
    ds.validate()?;
    Ok(ds)
}

/// Read an OCP table CSV with header (theta, volts).
pub fn read_ocp_table(path: &Path) -> Result<OcpTable> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers()?.clone();
    let t_idx = column_index(&headers, "theta", path)?;
    let v_idx = column_index(&headers, "volts", path)?;
    let mut theta = Vec::new();
    let mut volts = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = k + 2;
        theta.push(parse_field(&record, t_idx, line, path)?);
        volts.push(parse_field(&record, v_idx, line, path)?);
    }
    OcpTable::new(theta, volts)
}

/// Write an OCP table CSV.
pub fn write_ocp_table(path: &Path, table: &OcpTable) -> Result<()> {
    let mut out = String::from("theta,volts\n");
    let (theta, volts) = table.grid();
    for (t, v) in theta.iter().zip(volts) {
        out.push_str(&format!("{t},{v}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write the per-sample result series. The electrolyte snapshot occupies
/// one `c_e_<k>` column per cell.
pub fn write_results(path: &Path, result: &SimulationResult) -> Result<()> {
    let n_cells = result.electrolyte.first().map_or(0, |p| p.len());
    let mut out = String::from("time_s,current_A,voltage_V,soc_n,soc_p,rp_over_Rp,theta_p_surf,theta_n_surf");
    for k in 0..n_cells {
        out.push_str(&format!(",c_e_{k}"));
    }
    out.push('\n');
    for j in 0..result.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}",
            result.time_s[j],
            result.current_a[j],
            result.voltage_v[j],
            result.soc_n[j],
            result.soc_p[j],
            result.rp_over_rp[j],
            result.theta_p_surf[j],
            result.theta_n_surf[j]
        ));
        for c in &result.electrolyte[j] {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write the event log.
pub fn write_events(path: &Path, result: &SimulationResult) -> Result<()> {
    let mut out = String::from("time_s,event,detail\n");
    for e in &result.events {
        let detail = e.detail.replace(',', ";");
        out.push_str(&format!("{},{},{}\n", e.time_s, e.kind.label(), detail));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write a uniform-dt current profile.
pub fn write_profile(path: &Path, dt: f64, current: &[f64]) -> Result<()> {
    let mut out = String::from("time_s,current_A\n");
    for (k, i) in current.iter().enumerate() {
        let t = k as f64 * dt;
        out.push_str(&format!("{t},{i}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}
