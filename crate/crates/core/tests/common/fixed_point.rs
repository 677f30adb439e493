//! Binary fixed-point arithmetic and an exact-enough linear solver, used as
//! an oracle for the NLM posterior.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Binary fixed point with `FRAC` fractional bits, far beyond the dynamic
/// range of anything in these systems.
pub const FRAC: u32 = 2000;

#[derive(Clone)]
pub struct Fx(pub BigInt);

impl Fx {
    pub fn from_f64(v: f64) -> Self {
        let r = BigRational::from_float(v).expect("finite");
        Fx((r.numer() << FRAC) / r.denom())
    }
    pub fn to_f64(&self) -> f64 {
        BigRational::new(self.0.clone(), BigInt::from(1) << FRAC).to_f64().unwrap()
    }
    pub fn one() -> Self {
        Fx(BigInt::from(1) << FRAC)
    }
    pub fn mul(&self, o: &Fx) -> Fx {
        Fx((&self.0 * &o.0) >> FRAC)
    }
    pub fn div(&self, o: &Fx) -> Fx {
        Fx((&self.0 << FRAC) / &o.0)
    }
    pub fn add(&self, o: &Fx) -> Fx {
        Fx(&self.0 + &o.0)
    }
    pub fn sub(&self, o: &Fx) -> Fx {
        Fx(&self.0 - &o.0)
    }
}

/// Gauss-Jordan with partial pivoting on `[A | B]`.
pub fn solve(mut a: Vec<Vec<Fx>>, mut b: Vec<Vec<Fx>>) -> Vec<Vec<Fx>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].0.abs().cmp(&a[j][col].0.abs())).unwrap();
        assert!(!a[piv][col].0.is_zero(), "singular");
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col].clone();
        a[col] = a[col].iter().map(|v| v.div(&p)).collect();
        b[col] = b[col].iter().map(|v| v.div(&p)).collect();
        for r in 0..n {
            if r == col || a[r][col].0.is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            let (pa, pb) = (a[col].clone(), b[col].clone());
            for (v, p) in a[r].iter_mut().zip(&pa) {
                *v = v.sub(&f.mul(p));
            }
            for (v, p) in b[r].iter_mut().zip(&pb) {
                *v = v.sub(&f.mul(p));
            }
        }
    }
    b
}

impl Fx {
    pub fn zero() -> Self {
        Fx(BigInt::zero())
    }
}
