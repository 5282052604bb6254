//! Hourly load and normalized PV profiles: file I/O, synthesis and windowing.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use codesign_lp::lp_format::format_significant;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};

pub const HOURS: usize = 8760;
pub const DAYS: usize = 365;
pub const HEADER: [&str; 3] = ["hour", "load_kw", "pv_norm"];

#[derive(Debug, Clone, PartialEq)]
pub struct HourlyProfile {
    pub values: Vec<f64>,
    pub label: String,
}

impl HourlyProfile {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if values.len() != HOURS {
            return Err(CoreError::InvalidInput(format!("{label} has {} hours, expected {HOURS}", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(CoreError::InvalidInput(format!("{label} hour {i} is {}", values[i])));
        }
        Ok(Self { values, label })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// One year of hourly building load (kW) and PV output per installed kWp.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub load: HourlyProfile,
    pub pv_norm: HourlyProfile,
}

impl Dataset {
    pub fn new(load: Vec<f64>, pv_norm: Vec<f64>) -> Result<Self> {
        Ok(Self { load: HourlyProfile::new("load_kw", load)?, pv_norm: HourlyProfile::new("pv_norm", pv_norm)? })
    }

    pub fn hour_index(h: usize, d: usize) -> usize {
        (d % DAYS) * 24 + h % 24
    }

    pub fn load_at(&self, h: usize, d: usize) -> f64 {
        self.load.values[Self::hour_index(h, d)]
    }

    pub fn pv_at(&self, h: usize, d: usize) -> f64 {
        self.pv_norm.values[Self::hour_index(h, d)]
    }
}

fn data_err(row: usize, message: impl Into<String>) -> CoreError {
    CoreError::Data { row, message: message.into() }
}

/// Reads a `hour,load_kw,pv_norm` file. Error rows count the header as row 1.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(std::fs::File::open(path)?)
}

pub fn read_dataset<R: std::io::Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| data_err(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(data_err(1, format!("expected header {}", HEADER.join(","))));
    }
    let mut load = Vec::with_capacity(HOURS);
    let mut pv = Vec::with_capacity(HOURS);
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| data_err(row, e.to_string()))?;
        if record.len() != 3 {
            return Err(data_err(row, format!("expected 3 fields, found {}", record.len())));
        }
        let hour: usize = record[0].parse().map_err(|_| data_err(row, format!("malformed hour {:?}", &record[0])))?;
        if hour != i {
            return Err(data_err(row, format!("hour {hour} out of sequence, expected {i}")));
        }
        let field = |k: usize, name: &str| -> Result<f64> {
            let v: f64 = record[k].parse().map_err(|_| data_err(row, format!("malformed {name} {:?}", &record[k])))?;
            if !v.is_finite() {
                return Err(data_err(row, format!("{name} is not finite")));
            }
            if v < 0.0 {
                return Err(data_err(row, format!("negative {name} {v}")));
            }
            Ok(v)
        };
        load.push(field(1, "load_kw")?);
        pv.push(field(2, "pv_norm")?);
        if load.len() > HOURS {
            return Err(data_err(row, format!("more than {HOURS} data rows")));
        }
    }
    if load.len() != HOURS {
        return Err(data_err(load.len() + 2, format!("found {} data rows, expected {HOURS}", load.len())));
    }
    Dataset::new(load, pv)
}

/// Writes the dataset with values at 9 significant digits and LF line endings.
pub fn write_dataset<W: Write>(dataset: &Dataset, mut w: W) -> Result<()> {
    let mut out = String::with_capacity(HOURS * 28);
    out.push_str(&HEADER.join(","));
    out.push('\n');
    for (i, (l, p)) in dataset.load.values.iter().zip(&dataset.pv_norm.values).enumerate() {
        out.push_str(&format!("{i},{},{}\n", format_significant(*l, 9), format_significant(*p, 9)));
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn write_dataset_file(dataset: &Dataset, path: &Path) -> Result<()> {
    write_dataset(dataset, std::io::BufWriter::new(std::fs::File::create(path)?))
}

/// Knobs of the synthetic office-building generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Always-on load, kW.
    pub base_load_kw: f64,
    /// Extra load at the weekday midday peak, kW.
    pub office_peak_kw: f64,
    /// Fraction of the office bump present on Saturdays and Sundays.
    pub weekend_factor: f64,
    /// Half-width of the uniform multiplicative load noise.
    pub load_noise: f64,
    /// Lowest daily cloud factor; daily factors are uniform on [cloud_min, 1].
    pub cloud_min: f64,
    /// Lowest hourly cloud factor.
    pub cloud_hour_min: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            base_load_kw: 6.0,
            office_peak_kw: 24.0,
            weekend_factor: 0.15,
            load_noise: 0.1,
            cloud_min: 0.3,
            cloud_hour_min: 0.85,
        }
    }
}

/// Seasonal phase, zero at the spring equinox (day 80).
pub fn season(d: usize) -> f64 {
    (2.0 * PI * (d as f64 - 80.0) / 365.0).sin()
}

/// Hours of daylight on day `d`.
pub fn day_length(d: usize) -> f64 {
    12.0 + 4.0 * season(d)
}

/// Clear-sky peak of the normalized PV output on day `d`.
pub fn clear_sky_peak(d: usize) -> f64 {
    0.6 + 0.25 * season(d)
}

/// Clear-sky normalized PV output averaged at the midpoint of hour `h`.
pub fn clear_sky(h: usize, d: usize) -> f64 {
    let len = day_length(d);
    let sunrise = 12.0 - len / 2.0;
    let x = (h as f64 + 0.5 - sunrise) / len;
    if (0.0..=1.0).contains(&x) {
        clear_sky_peak(d) * (PI * x).sin()
    } else {
        0.0
    }
}

/// Weekday office bump: a half-sine between 07:00 and 19:00.
fn office_shape(h: usize) -> f64 {
    let x = (h as f64 + 0.5 - 7.0) / 12.0;
    if (0.0..=1.0).contains(&x) {
        (PI * x).sin()
    } else {
        0.0
    }
}

/// Day 0 is a Monday.
pub fn is_weekend(d: usize) -> bool {
    d % 7 >= 5
}

/// Deterministic synthetic year of office load and PV production.
pub fn synthesize_dataset(seed: u64, config: &SynthConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut load = Vec::with_capacity(HOURS);
    let mut pv = Vec::with_capacity(HOURS);
    for d in 0..DAYS {
        let cloud_day = rng.random_range(config.cloud_min..=1.0);
        let office = if is_weekend(d) { config.weekend_factor } else { 1.0 };
        for h in 0..24 {
            let cloud_hour = rng.random_range(config.cloud_hour_min..=1.0);
            let noise = 1.0 + rng.random_range(-config.load_noise..=config.load_noise);
            pv.push((clear_sky(h, d) * cloud_day * cloud_hour).clamp(0.0, 1.0));
            load.push(((config.base_load_kw + config.office_peak_kw * office * office_shape(h)) * noise).max(0.0));
        }
    }
    Dataset::new(load, pv).expect("generator output is non-negative and a full year")
}

/// `t` consecutive hours starting at midnight of `start_day`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub start_day: usize,
    pub load: Vec<f64>,
    pub pv_norm: Vec<f64>,
}

impl Window {
    pub fn len(&self) -> usize {
        self.load.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load.is_empty()
    }
}

/// Copies `t` hours from midnight of `start_day`, wrapping past the end of the year.
pub fn slice_window(dataset: &Dataset, start_day: usize, t: usize) -> Result<Window> {
    if start_day >= DAYS {
        return Err(CoreError::InvalidInput(format!("start day {start_day} outside 0..{}", DAYS - 1)));
    }
    if t == 0 {
        return Err(CoreError::InvalidInput("window length must be at least one hour".into()));
    }
    let idx = (0..t).map(|k| (start_day * 24 + k) % HOURS);
    Ok(Window {
        start_day,
        load: idx.clone().map(|i| dataset.load.values[i]).collect(),
        pv_norm: idx.map(|i| dataset.pv_norm.values[i]).collect(),
    })
}
