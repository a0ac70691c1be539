//! Embedded Dormand-Prince 5(4) stepping for two-component first-order systems.

pub(crate) type State = [f64; 2];

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive stepper. `h` carries the last accepted step size between calls.
#[derive(Debug, Clone)]
pub(crate) struct Stepper {
    pub rtol: f64,
    pub atol: f64,
    pub h: f64,
    pub max_steps: usize,
}

impl Stepper {
    pub fn new(rtol: f64, atol: f64, h0: f64) -> Self {
        Self {
            rtol,
            atol,
            h: h0,
            max_steps: 1_000_000,
        }
    }

    fn try_step<F>(&self, f: &F, t: f64, y: &State, h: f64) -> (State, f64)
    where
        F: Fn(f64, &State) -> State,
    {
        let mut k = [[0.0; 2]; 7];
        k[0] = f(t, y);
        for s in 1..7 {
            let mut ys = *y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    ys[0] += h * a * kj[0];
                    ys[1] += h * a * kj[1];
                }
            }
            k[s] = f(t + C[s] * h, &ys);
        }
        let mut y5 = *y;
        let mut err = 0.0_f64;
        for c in 0..2 {
            let mut e = 0.0;
            for s in 0..7 {
                y5[c] += h * B5[s] * k[s][c];
                e += h * (B5[s] - B4[s]) * k[s][c];
            }
            let scale = self.atol + self.rtol * y[c].abs().max(y5[c].abs());
            err = err.max((e / scale).abs());
        }
        (y5, err)
    }

    /// Advance from `t` to `t_end` (either direction). Returns `None` on step-size
    /// underflow or a non-finite state.
    pub fn advance<F>(&mut self, f: &F, mut t: f64, mut y: State, t_end: f64) -> Option<State>
    where
        F: Fn(f64, &State) -> State,
    {
        let dir = (t_end - t).signum();
        if dir == 0.0 {
            return Some(y);
        }
        let span = (t_end - t).abs();
        let mut h = self.h.abs().min(span);
        let mut steps = 0;
        while (t_end - t) * dir > 0.0 {
            steps += 1;
            if steps > self.max_steps || h < 1e-14 * span.max(1.0) {
                return None;
            }
            let remaining = (t_end - t).abs();
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            let (y_new, err) = self.try_step(f, t, &y, dir * step);
            if !y_new[0].is_finite() || !y_new[1].is_finite() {
                h *= 0.25;
                continue;
            }
            if err <= 1.0 {
                t = if last { t_end } else { t + dir * step };
                y = y_new;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // keep the previous step size when the last step was clipped
                if !last {
                    h = step * grow;
                } else {
                    h = h.max(step * grow);
                }
                self.h = h;
            } else {
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        Some(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let f = |_t: f64, y: &State| [y[1], -y[0]];
        let mut st = Stepper::new(1e-12, 1e-14, 0.1);
        let y = st.advance(&f, 0.0, [1.0, 0.0], 2.0 * std::f64::consts::PI).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10);
        assert!(y[1].abs() < 1e-10);
    }

    #[test]
    fn backward_integration_of_decay() {
        // y' = -y integrated backwards grows like e^t
        let f = |_t: f64, y: &State| [-y[0], 0.0];
        let mut st = Stepper::new(1e-12, 1e-300, 0.1);
        let y = st.advance(&f, 5.0, [(-5.0f64).exp(), 0.0], 0.0).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10);
    }
}
