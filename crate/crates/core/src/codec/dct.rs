//! Orthonormal 8×8 DCT-II and its inverse, computed separably with a
//! precomputed basis matrix.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// 8×8 block of real samples or coefficients, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block8(pub [f64; 64]);

impl Default for Block8 {
    fn default() -> Self {
        Block8([0.0; 64])
    }
}

impl Block8 {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row * 8 + col]
    }
}

/// `basis[u][x] = c_u / 2 * cos((2x + 1) u π / 16)`
fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (u, row) in m.iter_mut().enumerate() {
            let c = if u == 0 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = c / 2.0 * (((2 * x + 1) * u) as f64 * PI / 16.0).cos();
            }
        }
        m
    })
}

pub fn fdct(block: &Block8) -> Block8 {
    let c = basis();
    let f = &block.0;
    // rows: tmp[x][v] = sum_y f[x][y] c[v][y]
    let mut tmp = [0.0; 64];
    for x in 0..8 {
        for v in 0..8 {
            tmp[x * 8 + v] = (0..8).map(|y| f[x * 8 + y] * c[v][y]).sum();
        }
    }
    let mut out = [0.0; 64];
    for u in 0..8 {
        for v in 0..8 {
            out[u * 8 + v] = (0..8).map(|x| c[u][x] * tmp[x * 8 + v]).sum();
        }
    }
    Block8(out)
}

pub fn idct(block: &Block8) -> Block8 {
    let c = basis();
    let g = &block.0;
    // tmp[u][y] = sum_v g[u][v] c[v][y]
    let mut tmp = [0.0; 64];
    for u in 0..8 {
        for y in 0..8 {
            tmp[u * 8 + y] = (0..8).map(|v| g[u * 8 + v] * c[v][y]).sum();
        }
    }
    let mut out = [0.0; 64];
    for x in 0..8 {
        for y in 0..8 {
            out[x * 8 + y] = (0..8).map(|u| c[u][x] * tmp[u * 8 + y]).sum();
        }
    }
    Block8(out)
}
