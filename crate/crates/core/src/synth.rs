//! Synthetic labeled RSSI traces over the testbed geometry.
//!
//! Received power follows a log-distance path-loss model with an extra wall
//! loss whenever the mobile node and a sniffer sit on opposite sides of the
//! door plane. Per-sniffer AR(1) log-normal shadowing adds temporally
//! correlated noise; random dropouts report the missing-link sentinel.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{Dbm, MeasurementSet, RssiFrame};
use crate::features::coherence_time;
use crate::{Error, Result};

/// Superframe period in seconds.
pub const SUPERFRAME_S: f64 = 0.1;

/// BLE center frequency used for the default correlation.
pub const BLE_CARRIER_HZ: f64 = 2.44e9;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sniffer {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Sniffer {
    pub fn new(name: &str, x: f64, y: f64, z: f64) -> Self {
        Sniffer { name: name.to_string(), x, y, z }
    }
}

/// Sniffer positions plus the two cell boundaries along x (meters).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Geometry {
    pub sniffers: Vec<Sniffer>,
    /// Door plane: `x > x_door` is outside.
    pub x_door: f64,
    /// Test-position threshold: `x <= x_test` is on the test position.
    pub x_test: f64,
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if self.sniffers.is_empty() {
            return Err(Error::InvalidParameter("geometry has no sniffers".into()));
        }
        if !(self.x_test < self.x_door) {
            return Err(Error::InvalidParameter(format!(
                "x_test ({}) must be below x_door ({})",
                self.x_test, self.x_door
            )));
        }
        for (i, s) in self.sniffers.iter().enumerate() {
            if ![s.x, s.y, s.z].iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParameter(format!("sniffer {} has a non-finite position", s.name)));
            }
            if self.sniffers[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::DuplicateNode(s.name.clone()));
            }
        }
        Ok(())
    }

    pub fn node_labels(&self) -> Vec<String> {
        self.sniffers.iter().map(|s| s.name.clone()).collect()
    }

    /// Cell of a mobile node at `x`.
    pub fn label_at(&self, x: f64) -> u8 {
        if x > self.x_door {
            0
        } else if x <= self.x_test {
            2
        } else {
            1
        }
    }

    pub fn is_inside(&self, x: f64) -> bool {
        x <= self.x_door
    }
}

/// The ten-sniffer testbed: six nodes inside (I-*), four outside (O-*).
pub fn default_geometry() -> Geometry {
    Geometry {
        sniffers: alloc::vec![
            Sniffer::new("I-E", -13.30, 0.90, 0.64),
            Sniffer::new("I-T1", -9.88, -0.35, 3.92),
            Sniffer::new("I-T2", -6.58, -0.35, 3.92),
            Sniffer::new("I-T3", -1.60, -0.35, 3.92),
            Sniffer::new("I-DR", -1.55, 3.19, 1.00),
            Sniffer::new("I-DL", -1.55, -0.09, 1.00),
            Sniffer::new("O-E", 11.10, 2.02, 1.70),
            Sniffer::new("O-M", 6.80, 2.32, 1.84),
            Sniffer::new("O-DR", 2.21, 3.10, 0.99),
            Sniffer::new("O-DL", 2.21, 0.00, 1.00),
        ],
        x_door: 0.0,
        x_test: -10.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ChannelParams {
    pub tx_power_dbm: f64,
    /// Path loss at the 1 m reference distance.
    pub ref_loss_db: f64,
    pub path_loss_exponent: f64,
    /// Extra loss when transmitter and sniffer are on opposite sides of the door plane.
    pub wall_attenuation_db: f64,
    pub shadowing_std_db: f64,
    /// AR(1) coefficient per superframe. `None` derives `exp(-0.1 s / T_c)`
    /// from the coherence time at the trajectory's speed.
    pub shadowing_correlation: Option<f64>,
    pub carrier_hz: f64,
    /// Per-set, per-sniffer constant offset (hardware and mounting spread).
    pub node_offset_std_db: f64,
    pub dropout_probability: f64,
    /// Round to whole dBm; otherwise to tenths.
    pub quantize: bool,
    pub seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            tx_power_dbm: 0.0,
            ref_loss_db: 40.0,
            path_loss_exponent: 2.2,
            wall_attenuation_db: 15.0,
            shadowing_std_db: 8.0,
            shadowing_correlation: None,
            carrier_hz: BLE_CARRIER_HZ,
            node_offset_std_db: 2.0,
            dropout_probability: 0.02,
            quantize: true,
            seed: 0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.tx_power_dbm,
            self.ref_loss_db,
            self.wall_attenuation_db,
            self.shadowing_std_db,
            self.node_offset_std_db,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("channel parameters must be finite".into()));
        }
        if !(self.path_loss_exponent > 0.0) || !self.path_loss_exponent.is_finite() {
            return Err(Error::NonPositive { name: "path_loss_exponent", value: self.path_loss_exponent });
        }
        if self.shadowing_std_db < 0.0 || self.node_offset_std_db < 0.0 {
            return Err(Error::InvalidParameter("standard deviations must be >= 0".into()));
        }
        if let Some(rho) = self.shadowing_correlation {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::InvalidParameter(format!("shadowing correlation {rho} outside [0, 1)")));
            }
        }
        if !(0.0..=1.0).contains(&self.dropout_probability) {
            return Err(Error::InvalidParameter("dropout probability outside [0, 1]".into()));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::NonPositive { name: "carrier_hz", value: self.carrier_hz });
        }
        Ok(())
    }

    /// Log-distance path loss in dB; distances below 1 m are clamped.
    pub fn path_loss_db(&self, distance_m: f64) -> f64 {
        self.ref_loss_db + 10.0 * self.path_loss_exponent * libm::log10(distance_m.max(1.0))
    }

    fn correlation(&self, speed: f64) -> Result<f64> {
        match self.shadowing_correlation {
            Some(rho) => Ok(rho),
            None => Ok(libm::exp(-SUPERFRAME_S / coherence_time(speed, self.carrier_hz)?)),
        }
    }
}

/// A piece of a trajectory plan.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Segment {
    /// Stand still for this many superframes.
    Dwell(usize),
    /// Drive along x to this coordinate at the plan's speed.
    DriveTo(f64),
}

/// Declarative description of a trajectory, as stored in scenario files.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrajectoryPlan {
    pub start_x: f64,
    /// Lateral position and antenna height of the mobile node.
    pub y: f64,
    pub z: f64,
    /// Maximum speed in m/s.
    pub speed: f64,
    pub segments: Vec<Segment>,
}

impl Default for TrajectoryPlan {
    /// Park outside, drive onto the test position, stay, drive back out.
    fn default() -> Self {
        TrajectoryPlan {
            start_x: 12.0,
            y: 1.5,
            z: 1.0,
            speed: 1.0,
            segments: alloc::vec![
                Segment::Dwell(20),
                Segment::DriveTo(-11.5),
                Segment::Dwell(50),
                Segment::DriveTo(12.0),
                Segment::Dwell(20),
            ],
        }
    }
}

impl TrajectoryPlan {
    pub fn build(&self) -> Result<Trajectory> {
        if !(self.speed > 0.0) || !self.speed.is_finite() {
            return Err(Error::NonPositive { name: "speed", value: self.speed });
        }
        if ![self.start_x, self.y, self.z].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("trajectory coordinates must be finite".into()));
        }
        let step = self.speed * SUPERFRAME_S;
        let mut xs = alloc::vec![self.start_x];
        let mut x = self.start_x;
        for seg in &self.segments {
            match *seg {
                Segment::Dwell(n) => xs.extend(core::iter::repeat(x).take(n)),
                Segment::DriveTo(target) => {
                    if !target.is_finite() {
                        return Err(Error::InvalidParameter("drive target must be finite".into()));
                    }
                    let steps = libm::ceil((target - x).abs() / step) as usize;
                    for k in 1..=steps {
                        xs.push(x + (target - x) * k as f64 / steps as f64);
                    }
                    x = target;
                }
            }
        }
        Ok(Trajectory { xs, y: self.y, z: self.z, speed: self.speed })
    }
}

/// Mobile-node x position at each superframe.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    xs: Vec<f64>,
    y: f64,
    z: f64,
    speed: f64,
}

impl Trajectory {
    pub fn positions(&self) -> &[f64] {
        &self.xs
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }
}

/// Everything needed to generate sets: stored as one JSON scenario file.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Scenario {
    pub geometry: Geometry,
    pub channel: ChannelParams,
    pub trajectory: TrajectoryPlan,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            geometry: default_geometry(),
            channel: ChannelParams::default(),
            trajectory: TrajectoryPlan::default(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.channel.validate()?;
        self.trajectory.build().map(|_| ())
    }

    /// Generates one set with the given seed, overriding the channel seed.
    pub fn generate(&self, id: &str, seed: u64) -> Result<MeasurementSet> {
        let chan = ChannelParams { seed, ..self.channel.clone() };
        Ok(generate(&self.geometry, &chan, &self.trajectory.build()?)?.with_id(id))
    }

    /// `count` independent sets named `set-00`, `set-01`, ...; per-set seeds
    /// are drawn from a generator seeded with `seed`.
    pub fn generate_sets(&self, count: usize, seed: u64) -> Result<Vec<MeasurementSet>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| {
                let set_seed: u64 = rng.random();
                self.generate(&format!("set-{i:02}"), set_seed)
            })
            .collect()
    }
}

/// Noise-free received power at sniffer `s` from a mobile node at (x, y, z).
pub fn mean_rssi_dbm(geom: &Geometry, chan: &ChannelParams, s: &Sniffer, x: f64, y: f64, z: f64) -> f64 {
    let d = libm::sqrt((s.x - x) * (s.x - x) + (s.y - y) * (s.y - y) + (s.z - z) * (s.z - z));
    let wall = if geom.is_inside(x) != geom.is_inside(s.x) { chan.wall_attenuation_db } else { 0.0 };
    chan.tx_power_dbm - chan.path_loss_db(d) - wall
}

/// One frame per trajectory step, fully determined by `chan.seed`.
pub fn generate(geom: &Geometry, chan: &ChannelParams, traj: &Trajectory) -> Result<MeasurementSet> {
    geom.validate()?;
    chan.validate()?;
    if traj.is_empty() {
        return Err(Error::EmptySet);
    }
    let rho = chan.correlation(traj.speed)?;
    let innovation = libm::sqrt(1.0 - rho * rho);
    let mut rng = ChaCha8Rng::seed_from_u64(chan.seed);
    let n = geom.sniffers.len();
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let offsets: Vec<f64> = (0..n).map(|_| chan.node_offset_std_db * normal()).collect();
    let mut shadow: Vec<f64> = (0..n).map(|_| chan.shadowing_std_db * normal()).collect();

    let mut frames = Vec::with_capacity(traj.len());
    for (t, &x) in traj.xs.iter().enumerate() {
        if t > 0 {
            for s in shadow.iter_mut() {
                let w: f64 = rng.sample(StandardNormal);
                *s = rho * *s + innovation * chan.shadowing_std_db * w;
            }
        }
        let rssi = geom
            .sniffers
            .iter()
            .enumerate()
            .map(|(k, sn)| {
                let dropped = rng.random::<f64>() < chan.dropout_probability;
                let p = mean_rssi_dbm(geom, chan, sn, x, traj.y, traj.z) + offsets[k] - shadow[k];
                if dropped {
                    return Dbm::MISSING;
                }
                let p = if chan.quantize { libm::round(p) } else { p };
                let d = Dbm::from_f64(p);
                d.clamp(Dbm::MIN, Dbm::MAX)
            })
            .collect();
        frames.push(RssiFrame::new(t as u64, rssi, Some(geom.label_at(x))));
    }
    MeasurementSet::new(format!("synth-{}", chan.seed), geom.node_labels(), frames)
}
