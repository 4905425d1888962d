use crate::SimConfig;

/// Linear piece of the trajectory: the `served` queue (1 or 2, 0 when idle) drains from
/// `u[served−1]` at unit rate for `dt`; the other coordinate is constant.
pub(crate) struct Segment {
    pub u: [f64; 2],
    pub served: u8,
    pub dt: f64,
}

/// Exact time integrals over one replica's observation window.
pub(crate) struct Accumulator {
    tail_levels: Vec<f64>,
    transform_points: Vec<f64>,
    delta: f64,
    pub time: f64,
    empty: [f64; 2],
    both_empty: f64,
    busy: f64,
    diagonal: f64,
    workload: [f64; 2],
    strip: [f64; 2],
    tail: [Vec<f64>; 2],
    transform: [Vec<f64>; 2],
}

pub(crate) struct Averages {
    pub empty: [f64; 2],
    pub both_empty: f64,
    pub busy: f64,
    pub diagonal: f64,
    pub mean: [f64; 2],
    pub strip: [f64; 2],
    pub tail: [Vec<f64>; 2],
    pub transform: [Vec<f64>; 2],
}

/// ∫₀^dt exp(−s(a − τ)) dτ, written so that small `s·dt` keeps full precision.
fn drain_exp_integral(s: f64, a: f64, dt: f64) -> f64 {
    (-s * (a - dt)).exp() * (-(-s * dt).exp_m1()) / s
}

impl Accumulator {
    pub fn new(config: &SimConfig) -> Self {
        let nt = config.tail_levels.len();
        let ns = config.transform_points.len();
        Accumulator {
            tail_levels: config.tail_levels.clone(),
            transform_points: config.transform_points.clone(),
            delta: config.boundary_delta,
            time: 0.0,
            empty: [0.0; 2],
            both_empty: 0.0,
            busy: 0.0,
            diagonal: 0.0,
            workload: [0.0; 2],
            strip: [0.0; 2],
            tail: [vec![0.0; nt], vec![0.0; nt]],
            transform: [vec![0.0; ns], vec![0.0; ns]],
        }
    }

    pub fn add(&mut self, seg: &Segment) {
        let dt = seg.dt;
        if dt <= 0.0 {
            return;
        }
        self.time += dt;
        if seg.served == 0 {
            // Idle only happens at the origin.
            self.both_empty += dt;
            self.empty[0] += dt;
            self.empty[1] += dt;
            for k in 0..self.transform_points.len() {
                self.transform[0][k] += dt;
                self.transform[1][k] += dt;
            }
            return;
        }
        self.busy += dt;
        let d = seg.served as usize - 1;
        let c = 1 - d;
        let a = seg.u[d];
        let b = seg.u[c];
        // A draining coordinate meets a constant one at a single instant, so `diagonal`
        // (time with U1 = U2 > 0) only grows on idle-free segments where both are constant,
        // which the dynamics never produce.
        if b == 0.0 {
            self.empty[c] += dt;
            let lo = (a - self.delta).max(0.0);
            let hi = a.min(dt);
            self.strip[d] += (hi - lo).max(0.0);
        }
        self.workload[d] += (a - 0.5 * dt) * dt;
        self.workload[c] += b * dt;
        for (k, &level) in self.tail_levels.iter().enumerate() {
            self.tail[d][k] += (a - level).clamp(0.0, dt);
            if b > level {
                self.tail[c][k] += dt;
            }
        }
        for (k, &s) in self.transform_points.iter().enumerate() {
            if s == 0.0 {
                self.transform[d][k] += dt;
                self.transform[c][k] += dt;
            } else {
                self.transform[d][k] += drain_exp_integral(s, a, dt);
                self.transform[c][k] += (-s * b).exp() * dt;
            }
        }
    }

    pub fn averages(&self, delta: f64) -> Averages {
        let t = self.time;
        let scale = |v: &[f64]| v.iter().map(|x| x / t).collect::<Vec<_>>();
        Averages {
            empty: [self.empty[0] / t, self.empty[1] / t],
            both_empty: self.both_empty / t,
            busy: self.busy / t,
            diagonal: self.diagonal / t,
            mean: [self.workload[0] / t, self.workload[1] / t],
            strip: [self.strip[0] / (t * delta), self.strip[1] / (t * delta)],
            tail: [scale(&self.tail[0]), scale(&self.tail[1])],
            transform: [scale(&self.transform[0]), scale(&self.transform[1])],
        }
    }
}
