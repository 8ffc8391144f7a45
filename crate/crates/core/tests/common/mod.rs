#![allow(dead_code)]

pub mod gradcheck;

use rand::Rng;
use stcnet::numerics::ParamStore;
use stcnet::stlstm::StLstmCell;

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// One-channel cell on a single pixel, written out as plain arithmetic.
/// Only the centre tap of every `k × k` kernel can touch a 1×1 input.
#[derive(Debug, Clone, Copy)]
pub struct ScalarCell {
    pub wx: [f64; 7],
    pub bx: [f64; 7],
    pub wh: [f64; 4],
    pub wm: [f64; 3],
    pub wco: f64,
    pub wmo: f64,
    pub fuse_c: f64,
    pub fuse_m: f64,
    pub wc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarOut {
    pub h: f64,
    pub c: f64,
    pub m: f64,
    pub dc: f64,
    pub dm: f64,
}

impl ScalarCell {
    pub fn from_store(cell: &StLstmCell, store: &ParamStore<f64>) -> Self {
        let k = cell.shape.kernel_size;
        let centre = k * k / 2;
        let v = |id| store.value(id).data().to_vec();
        let (x, b, h, m, cm, f, d) = (
            v(cell.params.x_gates),
            v(cell.params.x_bias),
            v(cell.params.h_gates),
            v(cell.params.m_gates),
            v(cell.params.cm_output),
            v(cell.params.fusion),
            v(cell.params.decouple),
        );
        Self {
            wx: std::array::from_fn(|j| x[j * k * k + centre]),
            bx: std::array::from_fn(|j| b[j]),
            wh: std::array::from_fn(|j| h[j * k * k + centre]),
            wm: std::array::from_fn(|j| m[j * k * k + centre]),
            wco: cm[centre],
            wmo: cm[k * k + centre],
            fuse_c: f[0],
            fuse_m: f[1],
            wc: d[0],
        }
    }

    pub fn step(&self, x: f64, h: f64, c: f64, m: f64) -> ScalarOut {
        let (wx, bx, wh, wm) = (self.wx, self.bx, self.wh, self.wm);
        let i = sigmoid(wx[0] * x + wh[0] * h + bx[0]);
        let f = sigmoid(wx[1] * x + wh[1] * h + bx[1]);
        let g = (wx[2] * x + wh[2] * h + bx[2]).tanh();
        let c_new = f * c + i * g;
        let ip = sigmoid(wx[3] * x + wm[0] * m + bx[3]);
        let fp = sigmoid(wx[4] * x + wm[1] * m + bx[4]);
        let gp = (wx[5] * x + wm[2] * m + bx[5]).tanh();
        let m_new = fp * m + ip * gp;
        let o = sigmoid(wx[6] * x + wh[3] * h + self.wco * c_new + self.wmo * m_new + bx[6]);
        let h_new = o * (self.fuse_c * c_new + self.fuse_m * m_new).tanh();
        ScalarOut {
            h: h_new,
            c: c_new,
            m: m_new,
            dc: self.wc * i * g,
            dm: self.wc * ip * gp,
        }
    }
}

/// Overwrites every parameter with `U(-scale, scale)` draws.
pub fn randomize<R: Rng>(store: &mut ParamStore<f64>, rng: &mut R, scale: f64) {
    for p in store.iter_mut() {
        for v in p.value.data_mut() {
            *v = rng.random_range(-scale..scale);
        }
    }
}
