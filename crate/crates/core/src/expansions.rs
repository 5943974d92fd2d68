//! Series expansions of the 2D logarithmic kernel in complex form.
//!
//! Potential `phi(z) = sum_j q_j log(z - z_j)`; the physical potential is
//! `Re phi` and the field is `w = dphi/dz = sum_j q_j / (z - z_j)`.
//!
//! * multipole about `zm`: `a_0 log(z - zm) + sum_{k>=1} a_k (z - zm)^-k`
//! * local about `zl`: `sum_{l>=0} b_l (z - zl)^l`
//!
//! The principal branch of `log` is used throughout, so only `Re phi` and
//! the field are branch independent.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported truncation order.
pub const MAX_ORDER: u8 = 40;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A point source: complex position and complex strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Charge {
    pub z: Complex64,
    pub q: Complex64,
}

impl Charge {
    pub fn new(z: Complex64, q: Complex64) -> Self {
        Charge { z, q }
    }

    /// Charge with a real strength at `(x, y)`.
    pub fn real(x: f64, y: f64, q: f64) -> Self {
        Charge {
            z: Complex64::new(x, y),
            q: Complex64::new(q, 0.0),
        }
    }
}

/// Truncation order `p`; expansions carry `p + 1` coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Order(u8);

impl Order {
    pub fn new(p: u8) -> Result<Self> {
        if p > MAX_ORDER {
            return Err(Error::domain(format!(
                "expansion order {p} exceeds {MAX_ORDER}"
            )));
        }
        Ok(Order(p))
    }

    pub fn get(self) -> usize {
        usize::from(self.0)
    }

    /// Number of coefficients, `p + 1`.
    pub fn terms(self) -> usize {
        usize::from(self.0) + 1
    }
}

impl Default for Order {
    fn default() -> Self {
        Order(12)
    }
}

impl TryFrom<u8> for Order {
    type Error = Error;

    fn try_from(p: u8) -> Result<Self> {
        Order::new(p)
    }
}

impl From<Order> for u8 {
    fn from(o: Order) -> u8 {
        o.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Potential,
    Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionKind {
    Multipole,
    Local,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub kind: ExpansionKind,
    pub center: Complex64,
    pub coeffs: Vec<Complex64>,
}

impl Expansion {
    pub fn zero(kind: ExpansionKind, center: Complex64, p: Order) -> Self {
        Expansion {
            kind,
            center,
            coeffs: vec![ZERO; p.terms()],
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    /// `self += other`, coefficient-wise. Centers and orders must agree.
    pub fn accumulate(&mut self, other: &Expansion) {
        debug_assert_eq!(self.kind, other.kind);
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    pub fn scaled(&self, s: Complex64) -> Expansion {
        Expansion {
            kind: self.kind,
            center: self.center,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }
}

/// Pascal's triangle up to row `n`, built by the additive recurrence.
#[derive(Debug, Clone)]
pub struct Binomials {
    rows: Vec<Vec<f64>>,
}

impl Binomials {
    pub fn new(n: usize) -> Self {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let mut row = vec![1.0; i + 1];
            for j in 1..i {
                row[j] = rows[i - 1][j - 1] + rows[i - 1][j];
            }
            rows.push(row);
        }
        Binomials { rows }
    }

    /// `C(n, k)`, zero outside `0 <= k <= n`.
    pub fn get(&self, n: usize, k: usize) -> f64 {
        if k > n {
            0.0
        } else {
            self.rows[n][k]
        }
    }
}

/// Expansion operators for one fixed order.
#[derive(Debug, Clone)]
pub struct Operators {
    order: Order,
    binom: Binomials,
}

impl Operators {
    pub fn new(order: Order) -> Self {
        Operators {
            order,
            binom: Binomials::new(2 * order.get()),
        }
    }

    pub fn order(&self) -> Order {
        self.order
    }

    /// Particle to multipole: `a_0 = sum q`, `a_k = -sum q (z - zm)^k / k`.
    pub fn p2m(&self, charges: &[Charge], center: Complex64) -> Expansion {
        let mut out = Expansion::zero(ExpansionKind::Multipole, center, self.order);
        for c in charges {
            let d = c.z - center;
            out.coeffs[0] += c.q;
            let mut pow = c.q;
            for (k, a) in out.coeffs.iter_mut().enumerate().skip(1) {
                pow *= d;
                *a -= pow / k as f64;
            }
        }
        out
    }

    /// Multipole to multipole: re-centers `src` at `new_center` (exact for
    /// the retained terms).
    pub fn m2m(&self, src: &Expansion, new_center: Complex64) -> Result<Expansion> {
        expect_kind(src, ExpansionKind::Multipole)?;
        let p = src.order();
        let t = src.center - new_center;
        let a = &src.coeffs;
        let mut tp = Vec::with_capacity(p + 1);
        tp.push(Complex64::new(1.0, 0.0));
        for l in 1..=p {
            tp.push(tp[l - 1] * t);
        }
        let mut b = vec![ZERO; p + 1];
        b[0] = a[0];
        for l in 1..=p {
            let mut acc = -a[0] * tp[l] / l as f64;
            for k in 1..=l {
                acc += a[k] * tp[l - k] * self.binom.get(l - 1, k - 1);
            }
            b[l] = acc;
        }
        Ok(Expansion {
            kind: ExpansionKind::Multipole,
            center: new_center,
            coeffs: b,
        })
    }

    /// Multipole to local about `local_center`. Well-separatedness is the
    /// caller's responsibility.
    pub fn m2l(&self, src: &Expansion, local_center: Complex64) -> Result<Expansion> {
        expect_kind(src, ExpansionKind::Multipole)?;
        // z0 is the multipole center seen from the local center
        let z0 = src.center - local_center;
        if z0 == ZERO {
            return Err(Error::domain("M2L between coincident centers"));
        }
        let p = src.order();
        let a = &src.coeffs;
        let inv = z0.inv();

        // s_k = a_k (-1)^k / z0^k
        let mut s = vec![ZERO; p + 1];
        let mut w = Complex64::new(1.0, 0.0);
        for k in 1..=p {
            w *= -inv;
            s[k] = a[k] * w;
        }

        let mut b = vec![ZERO; p + 1];
        b[0] = a[0] * (-z0).ln() + s[1..].iter().sum::<Complex64>();
        let mut inv_l = Complex64::new(1.0, 0.0);
        for l in 1..=p {
            inv_l *= inv;
            let mut acc = -a[0] / l as f64;
            for k in 1..=p {
                acc += s[k] * self.binom.get(l + k - 1, k - 1);
            }
            b[l] = acc * inv_l;
        }
        Ok(Expansion {
            kind: ExpansionKind::Local,
            center: local_center,
            coeffs: b,
        })
    }

    /// Local to local: re-centers a polynomial exactly.
    pub fn l2l(&self, src: &Expansion, new_center: Complex64) -> Result<Expansion> {
        expect_kind(src, ExpansionKind::Local)?;
        let p = src.order();
        let t = new_center - src.center;
        let b = &src.coeffs;
        let mut tp = Vec::with_capacity(p + 1);
        tp.push(Complex64::new(1.0, 0.0));
        for l in 1..=p {
            tp.push(tp[l - 1] * t);
        }
        let mut c = vec![ZERO; p + 1];
        for (l, cl) in c.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in l..=p {
                acc += b[k] * self.binom.get(k, l) * tp[k - l];
            }
            *cl = acc;
        }
        Ok(Expansion {
            kind: ExpansionKind::Local,
            center: new_center,
            coeffs: c,
        })
    }
}

fn expect_kind(e: &Expansion, kind: ExpansionKind) -> Result<()> {
    if e.kind != kind {
        return Err(Error::domain(format!(
            "expected a {kind:?} expansion, got {:?}",
            e.kind
        )));
    }
    Ok(())
}

/// Evaluates a multipole expansion at `z` (outside its source disk).
pub fn evaluate_multipole(e: &Expansion, z: Complex64, mode: Mode) -> Result<Complex64> {
    expect_kind(e, ExpansionKind::Multipole)?;
    let dz = z - e.center;
    if dz == ZERO {
        return Err(Error::domain("multipole evaluated at its own center"));
    }
    let w = dz.inv();
    let a = &e.coeffs;
    Ok(match mode {
        Mode::Potential => {
            let mut acc = ZERO;
            for ak in a[1..].iter().rev() {
                acc = (acc + ak) * w;
            }
            a[0] * dz.ln() + acc
        }
        Mode::Field => {
            // a0 / dz - sum k a_k dz^(-k-1)
            let mut acc = ZERO;
            for (k, ak) in a.iter().enumerate().skip(1).rev() {
                acc = (acc + ak * k as f64) * w;
            }
            (a[0] - acc) * w
        }
    })
}

/// Evaluates a local expansion at `z` by Horner's rule.
pub fn evaluate_local(e: &Expansion, z: Complex64, mode: Mode) -> Result<Complex64> {
    expect_kind(e, ExpansionKind::Local)?;
    Ok(local_at(&e.coeffs, z - e.center, mode))
}

pub(crate) fn local_at(b: &[Complex64], u: Complex64, mode: Mode) -> Complex64 {
    match mode {
        Mode::Potential => b.iter().rev().fold(ZERO, |acc, bl| acc * u + bl),
        Mode::Field => b
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(ZERO, |acc, (l, bl)| acc * u + bl * l as f64),
    }
}

#[inline]
pub(crate) fn kernel(dz: Complex64, q: Complex64, mode: Mode) -> Complex64 {
    match mode {
        Mode::Potential => q * dz.ln(),
        Mode::Field => q / dz,
    }
}

/// Adds the direct interaction of `sources` onto each target's slot in `out`.
/// Exactly coincident pairs are skipped.
pub(crate) fn p2p_accumulate(
    targets: &[Charge],
    sources: &[Charge],
    mode: Mode,
    out: &mut [Complex64],
) {
    for (t, slot) in targets.iter().zip(out.iter_mut()) {
        let mut acc = ZERO;
        for s in sources {
            let dz = t.z - s.z;
            if dz != ZERO {
                acc += kernel(dz, s.q, mode);
            }
        }
        *slot += acc;
    }
}

/// Direct sum over all sources for each target, skipping coincident pairs.
pub fn p2p_direct(targets: &[Charge], sources: &[Charge], mode: Mode) -> Vec<Complex64> {
    let mut out = vec![ZERO; targets.len()];
    p2p_accumulate(targets, sources, mode, &mut out);
    out
}
