//! Dormand–Prince 5(4) integrator for autonomous systems, with the
//! fifth-order continuous extension used for event location.

pub trait System {
    fn dim(&self) -> usize;
    /// Writes `dy = f(y)`. Returns false if f cannot be evaluated at y.
    fn rhs(&mut self, y: &[f64], dy: &mut [f64]) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeError {
    Underflow { t: f64, h: f64 },
    Eval { t: f64 },
}

const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous extension over one accepted step `[t0, t0 + h]`.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    r: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> &[f64] {
        &self.r[0]
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.r;
        for i in 0..out.len() {
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
    }
}

/// Scratch space for one Runge–Kutta step.
#[derive(Debug, Clone)]
struct Stages {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y1: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Stages { k: std::array::from_fn(|_| vec![0.0; n]), tmp: vec![0.0; n], y1: vec![0.0; n] }
    }

    /// Stages 2..7 given `k[0] = f(y)`. Leaves the 5th-order result in `y1`
    /// and `k[6] = f(y1)`.
    fn run<S: System + ?Sized>(&mut self, sys: &mut S, y: &[f64], h: f64) -> bool {
        let n = y.len();
        let Stages { k, tmp, y1 } = self;
        macro_rules! stage {
            ($dst:expr, $($c:expr => $src:expr),+) => {{
                for i in 0..n {
                    tmp[i] = y[i] + h * (0.0 $(+ $c * k[$src][i])+);
                }
                let (_, rest) = k.split_at_mut($dst);
                if !sys.rhs(tmp, &mut rest[0]) {
                    return false;
                }
            }};
        }
        stage!(1, A21 => 0);
        stage!(2, A31 => 0, A32 => 1);
        stage!(3, A41 => 0, A42 => 1, A43 => 2);
        stage!(4, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
        stage!(5, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
        for i in 0..n {
            y1[i] = y[i] + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        let (_, rest) = k.split_at_mut(6);
        sys.rhs(y1, &mut rest[0])
    }
}

/// Single explicit fifth-order step of size h, no error control.
pub fn rk5_step<S: System + ?Sized>(sys: &mut S, y: &[f64], h: f64, out: &mut [f64]) -> bool {
    let mut st = Stages::new(y.len());
    if !sys.rhs(y, &mut st.k[0]) {
        return false;
    }
    if !st.run(sys, y, h) {
        return false;
    }
    out.copy_from_slice(&st.y1);
    true
}

/// Adaptive stepper state.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub t: f64,
    pub y: Vec<f64>,
    h: f64,
    facold: f64,
    st: Stages,
    fsal_ready: bool,
    pub last: Option<DenseStep>,
    pub accepted: usize,
    pub rejected: usize,
}

impl Dopri5 {
    pub fn new(y0: &[f64], rtol: f64, atol: f64) -> Self {
        Dopri5 {
            rtol,
            atol,
            t: 0.0,
            y: y0.to_vec(),
            h: 0.0,
            facold: 1e-4,
            st: Stages::new(y0.len()),
            fsal_ready: false,
            last: None,
            accepted: 0,
            rejected: 0,
        }
    }

    fn initial_step<S: System + ?Sized>(&mut self, sys: &mut S, h_max: f64) -> Result<f64, OdeError> {
        let n = self.y.len();
        let sk: Vec<f64> = self.y.iter().map(|v| self.atol + self.rtol * v.abs()).collect();
        let f0 = self.st.k[0].clone();
        let dnf = (f0.iter().zip(&sk).map(|(f, s)| (f / s).powi(2)).sum::<f64>() / n as f64).sqrt();
        let dny = (self.y.iter().zip(&sk).map(|(y, s)| (y / s).powi(2)).sum::<f64>() / n as f64).sqrt();
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * dny / dnf };
        h = h.min(h_max);
        let y1: Vec<f64> = self.y.iter().zip(&f0).map(|(y, f)| y + h * f).collect();
        let mut f1 = vec![0.0; n];
        if !sys.rhs(&y1, &mut f1) {
            return Err(OdeError::Eval { t: self.t });
        }
        let der2 = (f1.iter().zip(&f0).zip(&sk).map(|((a, b), s)| ((a - b) / s).powi(2)).sum::<f64>()
            / n as f64)
            .sqrt()
            / h;
        let der12 = der2.max(dnf);
        let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
        Ok((100.0 * h).min(h1).min(h_max))
    }

    /// Advances by one accepted step of size at most `h_max`; the continuous
    /// extension of the step is left in `last`.
    pub fn step<S: System + ?Sized>(&mut self, sys: &mut S, h_max: f64) -> Result<(), OdeError> {
        let n = self.y.len();
        if !self.fsal_ready {
            if !sys.rhs(&self.y, &mut self.st.k[0]) {
                return Err(OdeError::Eval { t: self.t });
            }
            self.fsal_ready = true;
            if self.h == 0.0 {
                self.h = self.initial_step(sys, h_max)?;
            }
        }
        let mut h = self.h.min(h_max);
        let mut reject = false;
        loop {
            if h.abs() < 1e-14 * (1.0 + self.t.abs()) {
                return Err(OdeError::Underflow { t: self.t, h });
            }
            let y = std::mem::take(&mut self.y);
            let ok = self.st.run(sys, &y, h);
            self.y = y;
            if !ok {
                // treat evaluation failure like a rejected step
                h *= 0.25;
                reject = true;
                self.rejected += 1;
                continue;
            }
            let k = &self.st.k;
            let mut err = 0.0;
            for i in 0..n {
                let sk = self.atol + self.rtol * self.y[i].abs().max(self.st.y1[i].abs());
                let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
                err += (e / sk).powi(2);
            }
            let err = (err / n as f64).sqrt();
            let fac11 = err.powf(0.2 - 0.04 * 0.75);
            if err <= 1.0 {
                let fac = (fac11 / self.facold.powf(0.04) / 0.9).clamp(0.2, 10.0);
                self.facold = err.max(1e-4);
                let mut hnew = h / fac;
                if reject {
                    hnew = hnew.min(h);
                }
                let r1 = self.y.clone();
                let r2: Vec<f64> = (0..n).map(|i| self.st.y1[i] - self.y[i]).collect();
                let r3: Vec<f64> = (0..n).map(|i| h * k[0][i] - r2[i]).collect();
                let r4: Vec<f64> = (0..n).map(|i| r2[i] - h * k[6][i] - r3[i]).collect();
                let r5: Vec<f64> = (0..n)
                    .map(|i| {
                        h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i])
                    })
                    .collect();
                self.last = Some(DenseStep { t0: self.t, h, r: [r1, r2, r3, r4, r5] });
                self.y.copy_from_slice(&self.st.y1);
                let (first, rest) = self.st.k.split_at_mut(6);
                first[0].copy_from_slice(&rest[0]);
                self.t += h;
                self.h = hnew;
                self.accepted += 1;
                return Ok(());
            }
            h /= (fac11 / 0.9).min(10.0);
            reject = true;
            self.rejected += 1;
        }
    }
}
