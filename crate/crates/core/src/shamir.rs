//! (n, t)-threshold Shamir sharing over a prime field.
//!
//! A [`Shared`] value bundles the shares of all `n` parties (party `i` holds
//! the evaluation at point `i`, 1-based). The harness advances every party in
//! lockstep, so keeping the shares side by side is the natural layout; no
//! operation here ever combines shares across parties except
//! [`reconstruct`].

use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;
use smallvec::SmallVec;

use crate::field::{Field, FieldElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShamirError {
    /// Parameters violate `n >= 3` and `2t < n`.
    BadThreshold {
        n: usize,
        t: usize,
    },
    NotEnoughShares {
        have: usize,
        need: usize,
    },
    DuplicateIndex(u16),
    ZeroIndex,
}

impl fmt::Display for ShamirError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShamirError::BadThreshold { n, t } => {
                write!(f, "threshold t={t} needs n >= 3 and t < n/2 (n={n})")
            }
            ShamirError::NotEnoughShares { have, need } => {
                write!(f, "{have} shares given, {need} needed")
            }
            ShamirError::DuplicateIndex(i) => write!(f, "duplicate share index {i}"),
            ShamirError::ZeroIndex => write!(f, "share index 0 is reserved for the secret"),
        }
    }
}

/// One party's share: the sharing polynomial evaluated at `party`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Share {
    pub party: u16,
    pub value: FieldElement,
}

/// Shares of one secret, indexed by party (`shares[i]` belongs to party `i+1`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Shared(pub SmallVec<[FieldElement; 4]>);

impl Shared {
    pub fn from_vec(v: Vec<FieldElement>) -> Self {
        Shared(SmallVec::from_vec(v))
    }

    /// The trivial sharing of a public constant (every share equals it).
    pub fn constant(n: usize, c: FieldElement) -> Self {
        Shared(SmallVec::from_elem(c, n))
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn share(&self, party_index: usize) -> Share {
        Share {
            party: (party_index + 1) as u16,
            value: self.0[party_index],
        }
    }

    pub fn shares(&self) -> impl Iterator<Item = Share> + '_ {
        (0..self.n()).map(|i| self.share(i))
    }
}

pub fn check_params(n: usize, t: usize) -> Result<(), ShamirError> {
    if n < 3 || 2 * t >= n || n > u16::MAX as usize {
        return Err(ShamirError::BadThreshold { n, t });
    }
    Ok(())
}

/// Evaluates the polynomial with the given coefficients (constant first) at
/// points `1..=n`.
pub fn eval_points(field: &Field, coeffs: &[FieldElement], n: usize) -> Vec<FieldElement> {
    (1..=n as u128)
        .map(|x| {
            let x = field.elem(x);
            coeffs.iter().rev().fold(FieldElement::ZERO, |acc, &c| {
                field.add(field.mul(acc, x), c)
            })
        })
        .collect()
}

/// Samples a degree-`t` polynomial with constant term `secret` and returns
/// its evaluations at `1..=n`.
pub fn share<R: RngCore + ?Sized>(
    field: &Field,
    secret: FieldElement,
    n: usize,
    t: usize,
    rng: &mut R,
) -> Result<Vec<Share>, ShamirError> {
    check_params(n, t)?;
    Ok(share_unchecked(field, secret, n, t, rng)
        .into_iter()
        .enumerate()
        .map(|(i, value)| Share {
            party: (i + 1) as u16,
            value,
        })
        .collect())
}

pub(crate) fn share_unchecked<R: RngCore + ?Sized>(
    field: &Field,
    secret: FieldElement,
    n: usize,
    t: usize,
    rng: &mut R,
) -> Vec<FieldElement> {
    let mut coeffs = Vec::with_capacity(t + 1);
    coeffs.push(secret);
    for _ in 0..t {
        coeffs.push(field.random(rng));
    }
    eval_points(field, &coeffs, n)
}

/// Lagrange coefficients at 0 for the given distinct nonzero points.
pub fn lagrange_at_zero(field: &Field, points: &[u16]) -> Result<Vec<FieldElement>, ShamirError> {
    for (i, &a) in points.iter().enumerate() {
        if a == 0 {
            return Err(ShamirError::ZeroIndex);
        }
        if points[..i].contains(&a) {
            return Err(ShamirError::DuplicateIndex(a));
        }
    }
    Ok(points
        .iter()
        .map(|&xi| {
            let mut num = FieldElement::ONE;
            let mut den = FieldElement::ONE;
            for &xj in points {
                if xj != xi {
                    num = field.mul(num, field.elem(xj as u128));
                    den = field.mul(
                        den,
                        field.sub(field.elem(xj as u128), field.elem(xi as u128)),
                    );
                }
            }
            // Points are distinct and below p, so den is nonzero.
            field.mul(num, field.inv(den).expect("distinct points"))
        })
        .collect())
}

/// Recovers the secret from at least `t + 1` shares.
pub fn reconstruct(field: &Field, shares: &[Share], t: usize) -> Result<FieldElement, ShamirError> {
    if shares.len() < t + 1 {
        return Err(ShamirError::NotEnoughShares {
            have: shares.len(),
            need: t + 1,
        });
    }
    let points: Vec<u16> = shares.iter().map(|s| s.party).collect();
    let lambda = lagrange_at_zero(field, &points)?;
    Ok(shares
        .iter()
        .zip(lambda)
        .fold(FieldElement::ZERO, |acc, (s, l)| {
            field.add(acc, field.mul(s.value, l))
        }))
}

/// True when all shares lie on one polynomial of degree at most `t`.
pub fn consistent(field: &Field, shares: &[Share], t: usize) -> bool {
    if shares.len() <= t + 1 {
        return true;
    }
    let base = &shares[..t + 1];
    let points: Vec<u16> = base.iter().map(|s| s.party).collect();
    shares[t + 1..].iter().all(|s| {
        // Interpolate the base at s.party and compare.
        let x = field.elem(s.party as u128);
        let mut acc = FieldElement::ZERO;
        for (i, b) in base.iter().enumerate() {
            let mut num = FieldElement::ONE;
            let mut den = FieldElement::ONE;
            for (j, &xj) in points.iter().enumerate() {
                if i != j {
                    let xj = field.elem(xj as u128);
                    num = field.mul(num, field.sub(x, xj));
                    den = field.mul(den, field.sub(field.elem(b.party as u128), xj));
                }
            }
            let l = field.mul(num, field.inv(den).expect("distinct points"));
            acc = field.add(acc, field.mul(l, b.value));
        }
        acc == s.value
    })
}
