//! Minute-resolution load/solar profiles and the sampled scenario sets built
//! from them.
//!
//! Profile CSV columns: `timestamp,bus_id,p_load_scale,q_load_scale,p_avail`,
//! one row per bus per minute. `timestamp` is the minute of the day. Load
//! scales multiply the bus ZIP rows; `p_avail` is the available DER power in
//! pu. Buses without rows keep scale 1 and zero availability.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ProfileError;
use crate::feeder::Feeder;

/// Length of one sampling interval in minutes.
pub const INTERVAL_MINUTES: u32 = 15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BusSample {
    pub p_load_scale: f64,
    pub q_load_scale: f64,
    pub p_avail: f64,
}

impl Default for BusSample {
    fn default() -> Self {
        BusSample {
            p_load_scale: 1.0,
            q_load_scale: 1.0,
            p_avail: 0.0,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    timestamp: u32,
    bus_id: usize,
    p_load_scale: f64,
    q_load_scale: f64,
    p_avail: f64,
}

/// Per-bus minute series over `[first_minute, first_minute + minutes)`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Profiles {
    pub first_minute: u32,
    pub minutes: usize,
    pub series: BTreeMap<usize, Vec<BusSample>>,
}

impl Profiles {
    pub fn new(first_minute: u32, minutes: usize) -> Self {
        Profiles {
            first_minute,
            minutes,
            series: BTreeMap::new(),
        }
    }

    pub fn end_minute(&self) -> u32 {
        self.first_minute + self.minutes as u32
    }

    pub fn insert(&mut self, bus: usize, samples: Vec<BusSample>) {
        assert_eq!(samples.len(), self.minutes, "series length must match the profile span");
        self.series.insert(bus, samples);
    }

    /// Every bus at one minute.
    pub fn instance_at(&self, minute: u32) -> ScenarioInstance {
        let k = (minute - self.first_minute) as usize;
        ScenarioInstance {
            timestamp: minute,
            buses: self.series.iter().map(|(&b, s)| (b, s[k])).collect(),
        }
    }

    /// Mean over `[start, end)` for every bus, stamped with `start`.
    pub fn mean_over(&self, start: u32, end: u32) -> ScenarioInstance {
        let (a, b) = ((start - self.first_minute) as usize, (end - self.first_minute) as usize);
        let n = (b - a) as f64;
        let buses = self
            .series
            .iter()
            .map(|(&bus, s)| {
                let sum = s[a..b].iter().fold((0.0, 0.0, 0.0), |acc, x| {
                    (acc.0 + x.p_load_scale, acc.1 + x.q_load_scale, acc.2 + x.p_avail)
                });
                let mean = BusSample {
                    p_load_scale: sum.0 / n,
                    q_load_scale: sum.1 / n,
                    p_avail: sum.2 / n,
                };
                (bus, mean)
            })
            .collect();
        ScenarioInstance { timestamp: start, buses }
    }

    /// Checks that every bus exists and availability is within the DER rating.
    pub fn validate_against(&self, feeder: &Feeder) -> Result<(), ProfileError> {
        for (&bus, s) in &self.series {
            let b = feeder.buses.get(bus).ok_or(ProfileError::UnknownBus(bus))?;
            let p_max = b.der.map_or(0.0, |d| d.p_max);
            for (k, x) in s.iter().enumerate() {
                if !(x.p_avail >= 0.0 && x.p_avail <= p_max + 1e-12) {
                    return Err(ProfileError::BadAvailability {
                        bus,
                        minute: self.first_minute + k as u32,
                        value: x.p_avail,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn read_csv(reader: impl Read) -> Result<Self, ProfileError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rows: BTreeMap<usize, BTreeMap<u32, BusSample>> = BTreeMap::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            rows.entry(row.bus_id).or_default().insert(
                row.timestamp,
                BusSample {
                    p_load_scale: row.p_load_scale,
                    q_load_scale: row.q_load_scale,
                    p_avail: row.p_avail,
                },
            );
        }
        let first = rows.values().filter_map(|m| m.keys().next().copied()).min().unwrap_or(0);
        let last = rows.values().filter_map(|m| m.keys().last().copied()).max().unwrap_or(0);
        let minutes = if rows.is_empty() { 0 } else { (last - first + 1) as usize };
        let mut profiles = Profiles::new(first, minutes);
        for (bus, m) in rows {
            let mut s = Vec::with_capacity(minutes);
            for minute in first..first + minutes as u32 {
                s.push(*m.get(&minute).ok_or(ProfileError::Gap { bus, minute })?);
            }
            profiles.series.insert(bus, s);
        }
        Ok(profiles)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<(), ProfileError> {
        let mut w = csv::Writer::from_writer(writer);
        for k in 0..self.minutes {
            for (&bus, s) in &self.series {
                w.serialize(Row {
                    timestamp: self.first_minute + k as u32,
                    bus_id: bus,
                    p_load_scale: s[k].p_load_scale,
                    q_load_scale: s[k].q_load_scale,
                    p_avail: s[k].p_avail,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ProfileError> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn to_path(&self, path: impl AsRef<Path>) -> Result<(), ProfileError> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Data of one sampled instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioInstance {
    pub timestamp: u32,
    pub buses: BTreeMap<usize, BusSample>,
}

impl ScenarioInstance {
    /// An instance with nominal loads and no solar.
    pub fn nominal(timestamp: u32) -> Self {
        ScenarioInstance {
            timestamp,
            buses: BTreeMap::new(),
        }
    }

    pub fn sample(&self, bus: usize) -> BusSample {
        self.buses.get(&bus).copied().unwrap_or_default()
    }

    pub fn p_avail(&self, bus: usize) -> f64 {
        self.sample(bus).p_avail
    }

    pub fn with(mut self, bus: usize, sample: BusSample) -> Self {
        self.buses.insert(bus, sample);
        self
    }
}

/// Operating period `[start, end)` in minutes of the day.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Period {
    pub start: u32,
    pub end: u32,
}

impl Period {
    pub fn new(start: u32, end: u32) -> Self {
        Period { start, end }
    }

    pub fn minutes(&self) -> u32 {
        self.end.saturating_sub(self.start)
    }

    pub fn intervals(&self) -> u32 {
        self.minutes() / INTERVAL_MINUTES
    }

    /// Parses a comma-separated list such as `0-480,480-720`.
    pub fn parse_list(text: &str) -> Result<Vec<Period>, ProfileError> {
        text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect()
    }
}

impl FromStr for Period {
    type Err = ProfileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ProfileError::PeriodSyntax(s.to_string());
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        Ok(Period {
            start: a.trim().parse().map_err(|_| bad())?,
            end: b.trim().parse().map_err(|_| bad())?,
        })
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// `S` distinct minutes drawn uniformly from each interval.
    Random,
    /// One instance per interval holding the interval means.
    IntervalMean,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSet {
    pub period: Period,
    pub samples_per_interval: usize,
    pub instances: Vec<ScenarioInstance>,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// A set made of explicit instances, mostly for tests and small studies.
    pub fn from_instances(instances: Vec<ScenarioInstance>) -> Self {
        let start = instances.first().map_or(0, |i| i.timestamp);
        let end = instances.last().map_or(0, |i| i.timestamp + 1);
        ScenarioSet {
            period: Period::new(start, end),
            samples_per_interval: 1,
            instances,
        }
    }
}

/// Splits `period` into 15-minute intervals and samples each one.
///
/// Random sampling yields `intervals * samples` instances, ordered by time and
/// reproducible from `seed`. `IntervalMean` yields one instance per interval.
pub fn build_scenarios(
    profiles: &Profiles,
    period: Period,
    samples: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<ScenarioSet, ProfileError> {
    if samples == 0 {
        return Err(ProfileError::NoSamples);
    }
    if period.start >= period.end || period.minutes() % INTERVAL_MINUTES != 0 {
        return Err(ProfileError::BadPeriod {
            start: period.start,
            end: period.end,
        });
    }
    if period.start < profiles.first_minute || period.end > profiles.end_minute() {
        return Err(ProfileError::OutOfRange {
            start: period.start,
            end: period.end,
            first: profiles.first_minute,
            last: profiles.end_minute().saturating_sub(1),
        });
    }
    if sampling == Sampling::Random && samples > INTERVAL_MINUTES as usize {
        return Err(ProfileError::TooManySamples {
            samples,
            minutes: INTERVAL_MINUTES as usize,
        });
    }
    // Mixing the period start in keeps periods independent under one seed.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(period.start) << 32));
    let mut instances = Vec::new();
    for k in 0..period.intervals() {
        let start = period.start + k * INTERVAL_MINUTES;
        match sampling {
            Sampling::IntervalMean => instances.push(profiles.mean_over(start, start + INTERVAL_MINUTES)),
            Sampling::Random => {
                let mut picks = sample(&mut rng, INTERVAL_MINUTES as usize, samples).into_vec();
                picks.sort_unstable();
                instances.extend(picks.into_iter().map(|m| profiles.instance_at(start + m as u32)));
            }
        }
    }
    Ok(ScenarioSet {
        period,
        samples_per_interval: if sampling == Sampling::Random { samples } else { 1 },
        instances,
    })
}
