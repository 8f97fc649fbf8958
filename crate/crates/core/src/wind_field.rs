//! Freestream synthesis and the delayed wake surrogate.
//!
//! Each turbine sheds a top-hat deficit that travels downstream at the
//! current freestream speed. Deficits arriving at a rotor are combined by
//! root-sum-square and low-pass filtered before being applied to the
//! freestream.

use std::collections::VecDeque;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default wake decay constant (onshore-typical).
pub const DEFAULT_WAKE_DECAY: f64 = 0.05;
/// Default time constant of the rotor-effective speed smoothing, s.
pub const DEFAULT_SMOOTHING_TIME: f64 = 5.0;
/// Default turbulence correlation time, s.
pub const DEFAULT_CORRELATION_TIME: f64 = 30.0;
/// Combined deficits are clamped to this value.
pub const MAX_COMBINED_DEFICIT: f64 = 0.95;

/// Turbine positions and wake parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarmLayout {
    /// Hub positions `(x, y)`, m.
    pub positions: Vec<(f64, f64)>,
    /// Rotor diameter, m.
    pub rotor_diameter: f64,
    /// Wind direction in degrees; 0 means flow along +x.
    pub wind_direction: f64,
    /// Wake expansion constant.
    pub wake_decay: f64,
    /// Time constant of the deficit smoothing, s.
    pub smoothing_time: f64,
}

/// One upstream/downstream interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WakePair {
    pub upstream: usize,
    pub downstream: usize,
    /// Streamwise separation, m.
    pub distance: f64,
}

impl FarmLayout {
    pub fn new(positions: Vec<(f64, f64)>, rotor_diameter: f64) -> Result<Self> {
        let layout = FarmLayout {
            positions,
            rotor_diameter,
            wind_direction: 0.0,
            wake_decay: DEFAULT_WAKE_DECAY,
            smoothing_time: DEFAULT_SMOOTHING_TIME,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// `count` turbines in one streamwise column, `spacing` rotor diameters apart.
    pub fn column(count: usize, spacing: f64, rotor_diameter: f64) -> Result<Self> {
        Self::grid(count, 1, spacing, 1.0, rotor_diameter)
    }

    /// Rectangular grid with `streamwise` turbines per column and `lateral`
    /// columns. Turbine `c * streamwise + k` is the `k`-th machine of column `c`.
    pub fn grid(
        streamwise: usize,
        lateral: usize,
        spacing_x: f64,
        spacing_y: f64,
        rotor_diameter: f64,
    ) -> Result<Self> {
        let mut positions = Vec::with_capacity(streamwise * lateral);
        for c in 0..lateral {
            for k in 0..streamwise {
                positions.push((
                    k as f64 * spacing_x * rotor_diameter,
                    c as f64 * spacing_y * rotor_diameter,
                ));
            }
        }
        Self::new(positions, rotor_diameter)
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::invalid("layout has no turbines"));
        }
        if !(self.rotor_diameter > 0.0) {
            return Err(Error::invalid("rotor diameter must be positive"));
        }
        if !(self.wake_decay > 0.0) {
            return Err(Error::invalid("wake decay constant must be positive"));
        }
        if !(self.smoothing_time >= 0.0) || !self.wind_direction.is_finite() {
            return Err(Error::invalid("smoothing time and wind direction must be finite"));
        }
        for (i, a) in self.positions.iter().enumerate() {
            if !a.0.is_finite() || !a.1.is_finite() {
                return Err(Error::invalid(format!("turbine {i} position is not finite")));
            }
            for (j, b) in self.positions.iter().enumerate().skip(i + 1) {
                if a == b {
                    return Err(Error::invalid(format!("turbines {i} and {j} share a position")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `(streamwise, lateral)` coordinates in the wind frame.
    pub fn wind_frame(&self) -> Vec<(f64, f64)> {
        let th = self.wind_direction.to_radians();
        let (s, c) = th.sin_cos();
        self.positions
            .iter()
            .map(|&(x, y)| (x * c + y * s, -x * s + y * c))
            .collect()
    }

    /// Turbine indices sorted from most upstream to most downstream.
    pub fn streamwise_order(&self) -> Vec<usize> {
        let frame = self.wind_frame();
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| frame[a].0.total_cmp(&frame[b].0).then(a.cmp(&b)));
        idx
    }

    /// All pairs where the downstream rotor sits strictly downstream and
    /// inside one rotor diameter laterally.
    pub fn wake_pairs(&self) -> Vec<WakePair> {
        let frame = self.wind_frame();
        let mut pairs = Vec::new();
        for (i, fi) in frame.iter().enumerate() {
            for (j, fj) in frame.iter().enumerate() {
                let dx = fi.0 - fj.0;
                if dx > 0.0 && (fi.1 - fj.1).abs() < self.rotor_diameter {
                    pairs.push(WakePair {
                        upstream: j,
                        downstream: i,
                        distance: dx,
                    });
                }
            }
        }
        pairs
    }
}

/// Sampled freestream wind speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreestreamTrace {
    pub dt: f64,
    pub samples: Vec<f64>,
    pub mean: f64,
    pub sigma: f64,
    pub seed: u64,
    pub correlation_time: f64,
}

impl FreestreamTrace {
    /// Sample `k`, holding the last value past the end.
    pub fn at(&self, k: usize) -> f64 {
        self.samples[k.min(self.samples.len() - 1)]
    }

    /// Reads a two-column `(time_s, speed_mps)` CSV with a header row and
    /// resamples it to `dt` by linear interpolation over `duration`.
    pub fn from_csv(path: impl AsRef<Path>, dt: f64, duration: f64) -> Result<Self> {
        let path = path.as_ref();
        let (times, values) = read_two_column_csv(path)?;
        if values.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Parse {
                context: path.display().to_string(),
                message: "wind speeds must be positive".into(),
            });
        }
        let samples = resample(&times, &values, dt, duration)?;
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var =
            samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / samples.len() as f64;
        Ok(FreestreamTrace {
            dt,
            samples,
            mean,
            sigma: var.sqrt() / mean,
            seed: 0,
            correlation_time: 0.0,
        })
    }
}

/// Reads `(t, value)` rows from a CSV file with a header line.
pub(crate) fn read_two_column_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse {
                    context: format!("{} row {}", path.display(), line + 2),
                    message: format!("column {} is missing or not a number", k + 1),
                })
        };
        times.push(parse(0)?);
        values.push(parse(1)?);
    }
    if times.is_empty() {
        return Err(Error::Parse {
            context: path.display().to_string(),
            message: "no data rows".into(),
        });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Parse {
            context: path.display().to_string(),
            message: "time column must be strictly increasing".into(),
        });
    }
    Ok((times, values))
}

/// Linear interpolation of `(times, values)` on the grid `k * dt`, clamped at
/// both ends.
pub(crate) fn resample(times: &[f64], values: &[f64], dt: f64, duration: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(duration > 0.0) {
        return Err(Error::invalid("dt and duration must be positive"));
    }
    let n = (duration / dt).round() as usize;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let t = k as f64 * dt;
        if t <= times[0] {
            out.push(values[0]);
            continue;
        }
        while seg + 1 < times.len() && times[seg + 1] < t {
            seg += 1;
        }
        if seg + 1 >= times.len() {
            out.push(values[values.len() - 1]);
        } else {
            let w = (t - times[seg]) / (times[seg + 1] - times[seg]);
            out.push(values[seg] + w * (values[seg + 1] - values[seg]));
        }
    }
    Ok(out)
}

/// AR(1)-coloured multiplicative turbulence around `mean` with the default
/// correlation time.
pub fn synth_freestream(
    mean: f64,
    sigma: f64,
    seed: u64,
    duration: f64,
    dt: f64,
) -> Result<FreestreamTrace> {
    synth_freestream_with(mean, sigma, seed, duration, dt, DEFAULT_CORRELATION_TIME)
}

pub fn synth_freestream_with(
    mean: f64,
    sigma: f64,
    seed: u64,
    duration: f64,
    dt: f64,
    correlation_time: f64,
) -> Result<FreestreamTrace> {
    if !(mean > 0.0) {
        return Err(Error::invalid("mean wind speed must be positive"));
    }
    if !(dt > 0.0) || !(duration > 0.0) {
        return Err(Error::invalid("dt and duration must be positive"));
    }
    if !(sigma >= 0.0) || !(correlation_time >= 0.0) {
        return Err(Error::invalid("turbulence intensity and correlation time must be >= 0"));
    }
    let n = (duration / dt).round() as usize;
    let phi = if correlation_time > 0.0 {
        (-dt / correlation_time).exp()
    } else {
        0.0
    };
    let innov = (1.0 - phi * phi).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z: f64 = StandardNormal.sample(&mut rng);
    let floor = 0.05 * mean;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        samples.push((mean * (1.0 + sigma * z)).max(floor));
        let e: f64 = StandardNormal.sample(&mut rng);
        z = phi * z + innov * e;
    }
    Ok(FreestreamTrace {
        dt,
        samples,
        mean,
        sigma,
        seed,
        correlation_time,
    })
}

/// Axial induction from the local thrust coefficient, inverting
/// `ct' = 4a / (1 - a)`.
pub fn induction_factor(ct_prime: f64) -> Result<f64> {
    if !(ct_prime >= 0.0) || !ct_prime.is_finite() {
        return Err(Error::invalid(format!("C_T' must be >= 0, got {ct_prime}")));
    }
    Ok(ct_prime / (4.0 + ct_prime))
}

/// Top-hat wake deficit at streamwise distance `x` behind a rotor with
/// induction `a`.
pub fn wake_deficit(a: f64, x: f64, rotor_diameter: f64, wake_decay: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::invalid(format!("induction must lie in [0, 1), got {a}")));
    }
    if !(x >= 0.0) || !(rotor_diameter > 0.0) || !(wake_decay > 0.0) {
        return Err(Error::invalid("wake deficit needs x >= 0 and positive D, k"));
    }
    let r = rotor_diameter / (rotor_diameter + 2.0 * wake_decay * x);
    Ok(2.0 * a * r * r)
}

/// Closed-form steady rotor speeds for constant thrust coefficients.
pub fn steady_speeds(layout: &FarmLayout, ct: &[f64], freestream: f64) -> Result<Vec<f64>> {
    if ct.len() != layout.len() {
        return Err(Error::invalid("thrust coefficient vector length mismatch"));
    }
    let pairs = layout.wake_pairs();
    let mut sq = vec![0.0; layout.len()];
    for p in &pairs {
        let a = induction_factor(ct[p.upstream])?;
        let d = wake_deficit(a, p.distance, layout.rotor_diameter, layout.wake_decay)?;
        sq[p.downstream] += d * d;
    }
    Ok(sq
        .iter()
        .map(|s| freestream * (1.0 - s.sqrt().min(MAX_COMBINED_DEFICIT)))
        .collect())
}

#[derive(Debug, Clone)]
struct DelayLine {
    pair: WakePair,
    /// Front is the most recent sample.
    history: VecDeque<f64>,
    capacity: usize,
}

impl DelayLine {
    fn lag(&self, advection_speed: f64, dt: f64) -> usize {
        ((self.pair.distance / (advection_speed * dt)).ceil() as usize).clamp(1, self.capacity)
    }

    fn read(&self, lag: usize) -> f64 {
        let idx = (lag - 1).min(self.history.len() - 1);
        self.history[idx]
    }

    fn push(&mut self, value: f64) {
        if self.history.len() == self.capacity {
            self.history.pop_back();
        }
        self.history.push_front(value);
    }
}

/// Rotor-effective wind speeds plus wake transport state.
#[derive(Debug, Clone)]
pub struct FlowFieldState {
    speeds: Vec<f64>,
    smoothed: Vec<f64>,
    lines: Vec<DelayLine>,
    step: usize,
    clamp_events: usize,
}

impl FlowFieldState {
    /// Starts from the converged field for constant `ct` and `freestream`.
    ///
    /// Delay lines hold enough history for advection speeds down to
    /// `min_advection_fraction * freestream`; longer lags read the oldest
    /// sample.
    pub fn steady(layout: &FarmLayout, ct: &[f64], freestream: f64, dt: f64) -> Result<Self> {
        Self::steady_with_floor(layout, ct, freestream, dt, 0.25)
    }

    pub fn steady_with_floor(
        layout: &FarmLayout,
        ct: &[f64],
        freestream: f64,
        dt: f64,
        min_advection_fraction: f64,
    ) -> Result<Self> {
        layout.validate()?;
        if ct.len() != layout.len() {
            return Err(Error::invalid("thrust coefficient vector length mismatch"));
        }
        if !(freestream > 0.0) || !(dt > 0.0) || !(min_advection_fraction > 0.0) {
            return Err(Error::invalid("freestream, dt and advection floor must be positive"));
        }
        let n = layout.len();
        let mut lines = Vec::new();
        let mut sq = vec![0.0; n];
        for pair in layout.wake_pairs() {
            let a = induction_factor(ct[pair.upstream])?;
            let d = wake_deficit(a, pair.distance, layout.rotor_diameter, layout.wake_decay)?;
            sq[pair.downstream] += d * d;
            let capacity = ((pair.distance / (min_advection_fraction * freestream * dt)).ceil()
                as usize)
                .max(1);
            lines.push(DelayLine {
                pair,
                history: std::iter::repeat_n(d, capacity).collect(),
                capacity,
            });
        }
        let smoothed: Vec<f64> = sq.iter().map(|s| s.sqrt().min(MAX_COMBINED_DEFICIT)).collect();
        let speeds = smoothed.iter().map(|d| freestream * (1.0 - d)).collect();
        Ok(FlowFieldState {
            speeds,
            smoothed,
            lines,
            step: 0,
            clamp_events: 0,
        })
    }

    /// Rotor-effective speeds `U_i`, m/s.
    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    /// Number of times the combined deficit had to be clamped.
    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    /// Current delay (in samples) of every wake pair at advection speed `u`.
    pub fn lags(&self, advection_speed: f64, dt: f64) -> Vec<(WakePair, usize)> {
        self.lines
            .iter()
            .map(|l| (l.pair, l.lag(advection_speed, dt)))
            .collect()
    }

    /// Advances one sample: reads transported deficits, updates `U_i`, then
    /// sheds new deficits from `ct`.
    pub fn step_field(
        &mut self,
        ct: &[f64],
        freestream: f64,
        layout: &FarmLayout,
        dt: f64,
    ) -> Result<&[f64]> {
        let n = self.speeds.len();
        if ct.len() != n || layout.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} thrust coefficients, got {}",
                ct.len()
            )));
        }
        if !(freestream > 0.0) || !(dt > 0.0) {
            return Err(Error::invalid("freestream and dt must be positive"));
        }
        let mut sq = vec![0.0; n];
        for line in &self.lines {
            let d = line.read(line.lag(freestream, dt));
            sq[line.pair.downstream] += d * d;
        }
        let alpha = if layout.smoothing_time > 0.0 {
            (-dt / layout.smoothing_time).exp()
        } else {
            0.0
        };
        for i in 0..n {
            let mut raw = sq[i].sqrt();
            if raw > MAX_COMBINED_DEFICIT {
                raw = MAX_COMBINED_DEFICIT;
                self.clamp_events += 1;
            }
            self.smoothed[i] += (1.0 - alpha) * (raw - self.smoothed[i]);
            debug_assert!(self.smoothed[i] < 1.0);
            self.speeds[i] = freestream * (1.0 - self.smoothed[i]);
        }
        for line in &mut self.lines {
            let a = induction_factor(ct[line.pair.upstream])?;
            let d = wake_deficit(a, line.pair.distance, layout.rotor_diameter, layout.wake_decay)?;
            line.push(d);
        }
        self.step += 1;
        Ok(&self.speeds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_turbulence_is_constant() {
        let tr = synth_freestream(9.0, 0.0, 42, 900.0, 1.0).unwrap();
        assert_eq!(tr.samples.len(), 900);
        assert!(tr.samples.iter().all(|&u| u == 9.0));
    }

    #[test]
    fn same_seed_same_trace() {
        let a = synth_freestream(9.0, 0.1, 7, 900.0, 1.0).unwrap();
        let b = synth_freestream(9.0, 0.1, 7, 900.0, 1.0).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = synth_freestream(9.0, 0.1, 8, 900.0, 1.0).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn turbulence_statistics_over_seeds() {
        let mut means = 0.0;
        let mut rel_std = 0.0;
        let seeds = 200;
        for seed in 0..seeds {
            let tr = synth_freestream(9.0, 0.1, seed, 900.0, 1.0).unwrap();
            let m = tr.samples.iter().sum::<f64>() / 900.0;
            let v = tr.samples.iter().map(|u| (u - m).powi(2)).sum::<f64>() / 900.0;
            means += m;
            rel_std += v.sqrt() / m;
        }
        let mean = means / seeds as f64;
        let rs = rel_std / seeds as f64;
        assert!((mean - 9.0).abs() < 0.3, "mean {mean}");
        assert!((0.05..=0.15).contains(&rs), "relative std {rs}");
    }

    #[test]
    fn synth_rejects_bad_parameters() {
        assert!(synth_freestream(0.0, 0.1, 0, 10.0, 1.0).is_err());
        assert!(synth_freestream(9.0, 0.1, 0, 10.0, 0.0).is_err());
        assert!(synth_freestream(9.0, -0.1, 0, 10.0, 1.0).is_err());
    }

    #[test]
    fn induction_examples() {
        assert_eq!(induction_factor(0.0).unwrap(), 0.0);
        assert!((induction_factor(2.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((induction_factor(4.0 / 3.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(induction_factor(-0.1).is_err());
        // round trip through ct' = 4a / (1 - a)
        for ct in [0.1, 0.5, 1.0, 2.0] {
            let a = induction_factor(ct).unwrap();
            assert!((4.0 * a / (1.0 - a) - ct).abs() < 1e-12);
        }
    }

    #[test]
    fn deficit_examples() {
        assert_eq!(wake_deficit(0.0, 500.0, 126.0, 0.05).unwrap(), 0.0);
        let d = wake_deficit(1.0 / 3.0, 630.0, 126.0, 0.05).unwrap();
        assert!((d - 8.0 / 27.0).abs() < 1e-12);
        assert!((wake_deficit(0.25, 0.0, 126.0, 0.05).unwrap() - 0.5).abs() < 1e-15);
        let far = wake_deficit(1.0 / 3.0, 1e6, 126.0, 0.05).unwrap();
        assert!(far < 1e-3);
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let d = wake_deficit(1.0 / 3.0, k as f64 * 50.0, 126.0, 0.05).unwrap();
            assert!(d < prev);
            prev = d;
        }
        assert!(wake_deficit(1.0, 1.0, 126.0, 0.05).is_err());
        assert!(wake_deficit(0.2, -1.0, 126.0, 0.05).is_err());
    }

    #[test]
    fn layout_validation() {
        assert!(FarmLayout::new(vec![(0.0, 0.0), (0.0, 0.0)], 126.0).is_err());
        assert!(FarmLayout::new(vec![(0.0, 0.0)], 0.0).is_err());
        assert!(FarmLayout::new(vec![], 126.0).is_err());
        let mut l = FarmLayout::column(3, 5.0, 126.0).unwrap();
        l.wake_decay = 0.0;
        assert!(l.validate().is_err());
    }

    #[test]
    fn pairs_respect_direction() {
        let mut l = FarmLayout::column(3, 5.0, 126.0).unwrap();
        assert_eq!(l.streamwise_order(), vec![0, 1, 2]);
        assert_eq!(l.wake_pairs().len(), 3);
        l.wind_direction = 180.0;
        assert_eq!(l.streamwise_order(), vec![2, 1, 0]);
        assert!(l.wake_pairs().iter().all(|p| p.upstream > p.downstream));
        // crosswind: nobody is waked
        l.wind_direction = 90.0;
        assert!(l.wake_pairs().is_empty());
    }

    #[test]
    fn single_turbine_sees_freestream() {
        let l = FarmLayout::new(vec![(0.0, 0.0)], 126.0).unwrap();
        let mut st = FlowFieldState::steady(&l, &[1.0], 9.0, 1.0).unwrap();
        let tr = synth_freestream(9.0, 0.1, 3, 100.0, 1.0).unwrap();
        for &u in &tr.samples {
            let s = st.step_field(&[1.5], u, &l, 1.0).unwrap();
            assert_eq!(s[0], u);
        }
    }

    #[test]
    fn two_turbine_steady_state() {
        let l = FarmLayout::column(2, 5.0, 126.0).unwrap();
        let mut st = FlowFieldState::steady(&l, &[0.5, 0.5], 10.0, 1.0).unwrap();
        for _ in 0..400 {
            st.step_field(&[2.0, 2.0], 10.0, &l, 1.0).unwrap();
        }
        let expect = 10.0 * (1.0 - 8.0 / 27.0);
        assert!((st.speeds()[1] - expect).abs() < 1e-9);
        assert!((st.speeds()[1] - 7.0370).abs() < 1e-4);
    }

    #[test]
    fn delay_line_holds_step_change() {
        let l = FarmLayout::column(2, 5.0, 126.0).unwrap();
        let mut st = FlowFieldState::steady(&l, &[1.0, 1.0], 10.0, 1.0).unwrap();
        let u0 = st.speeds()[1];
        let lag = (630.0f64 / 10.0).floor() as usize;
        for k in 0..lag {
            let s = st.step_field(&[2.0, 1.0], 10.0, &l, 1.0).unwrap();
            assert_eq!(s[1], u0, "changed early at step {k}");
        }
        let s = st.step_field(&[2.0, 1.0], 10.0, &l, 1.0).unwrap();
        assert!(s[1] < u0);
    }

    #[test]
    fn converges_to_closed_form() {
        let l = FarmLayout::column(5, 5.0, 126.0).unwrap();
        let ct = [1.7, 0.4, 2.0, 1.1, 0.8];
        let mut st = FlowFieldState::steady(&l, &[0.3; 5], 8.0, 1.0).unwrap();
        let longest = st.lags(8.0, 1.0).iter().map(|x| x.1).max().unwrap();
        let steps = 5 * longest + (5.0 * l.smoothing_time) as usize;
        for _ in 0..steps {
            st.step_field(&ct, 8.0, &l, 1.0).unwrap();
        }
        let want = steady_speeds(&l, &ct, 8.0).unwrap();
        for (a, b) in st.speeds().iter().zip(&want) {
            assert!(((a - b) / b).abs() < 1e-6);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let l = FarmLayout::column(2, 5.0, 126.0).unwrap();
        let mut st = FlowFieldState::steady(&l, &[1.0, 1.0], 10.0, 1.0).unwrap();
        assert!(st.step_field(&[1.0], 10.0, &l, 1.0).is_err());
    }

    #[test]
    fn csv_ingestion_interpolates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("wind.csv");
        std::fs::write(&p, "time_s,speed_mps\n0,8\n10,10\n").unwrap();
        let tr = FreestreamTrace::from_csv(&p, 1.0, 20.0).unwrap();
        assert_eq!(tr.samples.len(), 20);
        assert_eq!(tr.samples[0], 8.0);
        assert!((tr.samples[5] - 9.0).abs() < 1e-12);
        assert_eq!(tr.samples[15], 10.0);
        std::fs::write(&p, "time_s,speed_mps\n0,8\n10,-1\n").unwrap();
        assert!(FreestreamTrace::from_csv(&p, 1.0, 20.0).is_err());
    }

    proptest! {
        #[test]
        fn upstream_thrust_never_speeds_up_downstream(
            ct in prop::collection::vec(0.1..2.0f64, 6),
            which in 0usize..6,
            bump in 0.0..1.0f64,
        ) {
            let l = FarmLayout::grid(3, 2, 5.0, 0.5, 126.0).unwrap();
            let base = steady_speeds(&l, &ct, 9.0).unwrap();
            let mut ct2 = ct.clone();
            ct2[which] = (ct2[which] + bump).min(2.0);
            let more = steady_speeds(&l, &ct2, 9.0).unwrap();
            for (a, b) in base.iter().zip(&more) {
                prop_assert!(*b <= *a + 1e-12);
                prop_assert!(*b > 0.0 && *b <= 9.0);
            }
        }

        #[test]
        fn speeds_stay_bounded(seed in 0u64..50) {
            let l = FarmLayout::column(4, 3.0, 126.0).unwrap();
            let tr = synth_freestream(9.0, 0.15, seed, 200.0, 1.0).unwrap();
            let mut st = FlowFieldState::steady(&l, &[1.0; 4], tr.samples[0], 1.0).unwrap();
            for (k, &u) in tr.samples.iter().enumerate() {
                let ct = [2.0 - (k % 7) as f64 * 0.2, 1.0, 0.5, 2.0];
                let s = st.step_field(&ct, u, &l, 1.0).unwrap();
                for &ui in s {
                    prop_assert!(ui > 0.0 && ui <= u);
                }
            }
        }
    }
}
