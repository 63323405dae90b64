//! Derived private primitives: selection, equality, less-than, and bit
//! decomposition.
//!
//! Comparisons mask the operand difference with dealer-supplied random bits,
//! open the masked value, and finish with a logarithmic-depth circuit that
//! compares public bits against shared ones. With `k`-bit operands:
//!
//! | op | openings | multiplications | rounds |
//! |----|----------|-----------------|--------|
//! | `eq_test` | 1 | `k` | `1 + ceil(log2(k+1))` |
//! | `lt_test` | 1 | `2k - 3` | `1 + ceil(log2 k)` |
//! | `bit_decompose` | 1 | `k - 1` | `k` |
//!
//! Operands must be `k`-bit integers, either signed (centered) or unsigned,
//! and the field needs `k + kappa + 1` bits of room.

use alloc::vec::Vec;
use core::fmt;

use crate::field::FieldElement;
use crate::harness::{Engine, EngineError};
use crate::shamir::Shared;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MpcError {
    Engine(EngineError),
    /// The field cannot hold a `bitlen`-bit value plus the masking headroom.
    FieldTooSmall {
        bitlen: u32,
        kappa: u32,
        field_bitlen: u32,
    },
}

impl fmt::Display for MpcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MpcError::Engine(e) => write!(f, "{e}"),
            MpcError::FieldTooSmall { bitlen, kappa, field_bitlen } => write!(
                f,
                "{bitlen}-bit comparison with kappa={kappa} needs more than {field_bitlen} field bits"
            ),
        }
    }
}

impl From<EngineError> for MpcError {
    fn from(e: EngineError) -> Self {
        MpcError::Engine(e)
    }
}

pub type Result<T> = core::result::Result<T, MpcError>;

fn check_room(eng: &Engine, bitlen: u32) -> Result<()> {
    let fb = eng.field().params().field_bitlen;
    let kappa = eng.kappa();
    if kappa == 0 || bitlen == 0 || bitlen + kappa + 1 > fb {
        return Err(MpcError::FieldTooSmall {
            bitlen,
            kappa,
            field_bitlen: fb,
        });
    }
    Ok(())
}

/// `c * (a2 - a) + a`: `a2` when `c = 1`, `a` when `c = 0`.
pub fn mux_value(eng: &mut Engine, a: &Shared, a2: &Shared, c: &Shared) -> Result<Shared> {
    Ok(mux_many(eng, &[(a, a2, c)])?.pop().unwrap())
}

/// Several independent selections in one round.
pub fn mux_many(eng: &mut Engine, items: &[(&Shared, &Shared, &Shared)]) -> Result<Vec<Shared>> {
    let diffs: Vec<Shared> = items.iter().map(|(a, a2, _)| eng.sub(a2, a)).collect();
    let mut b = eng.batch();
    for ((_, _, c), d) in items.iter().zip(&diffs) {
        b.mul(c, d);
    }
    let prods = eng.run(b)?;
    Ok(prods
        .iter()
        .zip(items)
        .map(|(p, (a, _, _))| eng.add(p, a))
        .collect())
}

pub fn and(eng: &mut Engine, a: &Shared, b: &Shared) -> Result<Shared> {
    Ok(eng.mul(a, b)?)
}

pub fn or(eng: &mut Engine, a: &Shared, b: &Shared) -> Result<Shared> {
    let ab = eng.mul(a, b)?;
    Ok(eng.sub(&eng.add(a, b), &ab))
}

pub fn not(eng: &Engine, a: &Shared) -> Shared {
    eng.one_minus(a)
}

/// Low `bits` bits of a public field element, least significant first.
fn public_bits(v: FieldElement, bits: u32) -> Vec<bool> {
    (0..bits).map(|i| (v.value() >> i) & 1 == 1).collect()
}

/// Shared `[b == bit]` for a public bit.
fn xnor_public(eng: &Engine, b: &Shared, bit: bool) -> Shared {
    if bit {
        b.clone()
    } else {
        eng.one_minus(b)
    }
}

/// Masked opening: returns the opened value of `z + r' + 2^low * r''` for
/// every `z`, with `r'` given as `low` dealer bits and `r''` a dealer
/// integer of `high` bits.
fn mask_and_open(
    eng: &mut Engine,
    zs: &[Shared],
    low: u32,
    high: u32,
) -> Result<(Vec<FieldElement>, Vec<Vec<Shared>>)> {
    let f = *eng.field();
    let mut masked = Vec::with_capacity(zs.len());
    let mut rbits = Vec::with_capacity(zs.len());
    for z in zs {
        let bits = eng.dealer_rand_bits(low as usize);
        let hi = eng.dealer_rand_int(high);
        let mut terms: Vec<(FieldElement, &Shared)> = bits
            .iter()
            .enumerate()
            .map(|(i, b)| (f.pow2(i as u32), b))
            .collect();
        terms.push((f.pow2(low), &hi));
        terms.push((FieldElement::ONE, z));
        masked.push(eng.lincomb(&terms, FieldElement::ZERO));
        rbits.push(bits);
    }
    let opened = eng.open_many(&masked)?;
    Ok((opened, rbits))
}

/// AND of each row of shared bits, all rows reduced level by level in
/// shared rounds.
fn and_all(eng: &mut Engine, mut rows: Vec<Vec<Shared>>) -> Result<Vec<Shared>> {
    while rows.iter().any(|r| r.len() > 1) {
        let mut b = eng.batch();
        let mut plan = Vec::with_capacity(rows.len());
        for r in &rows {
            let mut idx = Vec::with_capacity(r.len() / 2);
            for pair in r.chunks(2) {
                if pair.len() == 2 {
                    idx.push(Some(b.mul(&pair[0], &pair[1])));
                } else {
                    idx.push(None);
                }
            }
            plan.push(idx);
        }
        let out = eng.run(b)?;
        rows = rows
            .into_iter()
            .zip(plan)
            .map(|(r, idx)| {
                idx.into_iter()
                    .enumerate()
                    .map(|(j, k)| match k {
                        Some(k) => out[k].clone(),
                        None => r[2 * j].clone(),
                    })
                    .collect()
            })
            .collect();
    }
    Ok(rows.into_iter().map(|mut r| r.pop().unwrap()).collect())
}

pub fn eq_test(eng: &mut Engine, x: &Shared, y: &Shared, bitlen: u32) -> Result<Shared> {
    Ok(eq_many(eng, &[(x, y)], bitlen)?.pop().unwrap())
}

/// `[x == y]` for each pair, sharing rounds across pairs.
pub fn eq_many(eng: &mut Engine, pairs: &[(&Shared, &Shared)], bitlen: u32) -> Result<Vec<Shared>> {
    check_room(eng, bitlen)?;
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let f = *eng.field();
    let k = bitlen;
    let m = k + 1;
    // z = x - y + 2^k lies in [1, 2^(k+1)); x == y iff z == 2^k.
    let zs: Vec<Shared> = pairs
        .iter()
        .map(|(x, y)| eng.add_const(&eng.sub(x, y), f.pow2(k)))
        .collect();
    let (opened, rbits) = mask_and_open(eng, &zs, m, eng.kappa() - 1)?;
    let rows = opened
        .iter()
        .zip(rbits)
        .map(|(c, bits)| {
            // z == 2^k iff r' == (c - 2^k) mod 2^m, bit by bit.
            let e = c.value().wrapping_sub(1u128 << k) & ((1u128 << m) - 1);
            let e = public_bits(f.elem(e), m);
            bits.iter()
                .zip(e)
                .map(|(b, ei)| xnor_public(eng, b, ei))
                .collect()
        })
        .collect();
    and_all(eng, rows)
}

/// Shared `[c < r]` for public `c` and shared bits of `r` (LSB first), for
/// many instances at once.
fn public_lt_shared(eng: &mut Engine, items: Vec<(Vec<bool>, Vec<Shared>)>) -> Result<Vec<Shared>> {
    // Each node carries (lt, eq) over a contiguous bit range; leaves are
    // single bits, ordered LSB first.
    let mut rows: Vec<Vec<(Shared, Shared)>> = items
        .into_iter()
        .map(|(c, r)| {
            c.into_iter()
                .zip(r)
                .map(|(ci, ri)| {
                    let lt = if ci { eng.zero() } else { ri.clone() };
                    let eq = xnor_public(eng, &ri, ci);
                    (lt, eq)
                })
                .collect()
        })
        .collect();
    while rows.iter().any(|r| r.len() > 1) {
        let mut b = eng.batch();
        let mut plan = Vec::with_capacity(rows.len());
        for r in &rows {
            let last_level = r.len() == 2;
            let mut idx = Vec::with_capacity(r.len() / 2 + 1);
            for pair in r.chunks(2) {
                if pair.len() == 2 {
                    let (lo, hi) = (&pair[0], &pair[1]);
                    let lt = b.mul(&hi.1, &lo.0);
                    // The root never needs its eq component.
                    let eq = (!last_level).then(|| b.mul(&hi.1, &lo.1));
                    idx.push(Some((lt, eq)));
                } else {
                    idx.push(None);
                }
            }
            plan.push(idx);
        }
        let out = eng.run(b)?;
        rows = rows
            .into_iter()
            .zip(plan)
            .map(|(r, idx)| {
                idx.into_iter()
                    .enumerate()
                    .map(|(j, p)| match p {
                        Some((lt, eq)) => {
                            let hi = &r[2 * j + 1];
                            let new_lt = eng.add(&hi.0, &out[lt]);
                            let new_eq = match eq {
                                Some(e) => out[e].clone(),
                                None => eng.zero(),
                            };
                            (new_lt, new_eq)
                        }
                        None => r[2 * j].clone(),
                    })
                    .collect()
            })
            .collect();
    }
    Ok(rows.into_iter().map(|mut r| r.pop().unwrap().0).collect())
}

pub fn lt_test(eng: &mut Engine, x: &Shared, y: &Shared, bitlen: u32) -> Result<Shared> {
    Ok(lt_many(eng, &[(x, y)], bitlen)?.pop().unwrap())
}

/// `[x < y]` (signed) for each pair, sharing rounds across pairs.
pub fn lt_many(eng: &mut Engine, pairs: &[(&Shared, &Shared)], bitlen: u32) -> Result<Vec<Shared>> {
    check_room(eng, bitlen)?;
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let f = *eng.field();
    let k = bitlen;
    // z = x - y + 2^k in [1, 2^(k+1)); x < y iff bit k of z is 0.
    let zs: Vec<Shared> = pairs
        .iter()
        .map(|(x, y)| eng.add_const(&eng.sub(x, y), f.pow2(k)))
        .collect();
    let (opened, rbits) = mask_and_open(eng, &zs, k, eng.kappa())?;
    let low_mask = (1u128 << k) - 1;
    let items: Vec<(Vec<bool>, Vec<Shared>)> = opened
        .iter()
        .zip(&rbits)
        .map(|(c, bits)| (public_bits(*c, k), bits.clone()))
        .collect();
    let us = public_lt_shared(eng, items)?;
    let inv = f.inv(f.pow2(k)).expect("2^k is invertible");
    Ok(zs
        .iter()
        .zip(&opened)
        .zip(rbits.iter().zip(&us))
        .map(|((z, c), (bits, u))| {
            // z mod 2^k = c' - r' + 2^k * u
            let cprime = f.elem(c.value() & low_mask);
            let mut terms: Vec<(FieldElement, &Shared)> = bits
                .iter()
                .enumerate()
                .map(|(i, b)| (f.neg(f.pow2(i as u32)), b))
                .collect();
            terms.push((f.pow2(k), u));
            let zmod = eng.lincomb(&terms, cprime);
            let msb = eng.scale(inv, &eng.sub(z, &zmod));
            eng.one_minus(&msb)
        })
        .collect())
}

/// Shared bits (LSB first) of `x`, which must lie in `[0, 2^bitlen)`.
pub fn bit_decompose(eng: &mut Engine, x: &Shared, bitlen: u32) -> Result<Vec<Shared>> {
    check_room(eng, bitlen)?;
    let f = *eng.field();
    let k = bitlen;
    let (opened, mut rbits) = mask_and_open(eng, core::slice::from_ref(x), k, eng.kappa())?;
    let a = public_bits(opened[0], k);
    let r = rbits.pop().unwrap();
    // Ripple-borrow subtraction a - r' mod 2^k.
    let mut out = Vec::with_capacity(k as usize);
    let mut borrow = eng.zero();
    let two = f.elem(2);
    for (i, (ai, ri)) in a.iter().zip(&r).enumerate() {
        let prod = if i == 0 {
            eng.zero()
        } else {
            eng.mul(ri, &borrow)?
        };
        let xor = eng.lincomb(
            &[
                (FieldElement::ONE, ri),
                (FieldElement::ONE, &borrow),
                (f.neg(two), &prod),
            ],
            FieldElement::ZERO,
        );
        if *ai {
            out.push(eng.one_minus(&xor));
            borrow = prod;
        } else {
            out.push(xor);
            borrow = eng.sub(&eng.add(ri, &borrow), &prod);
        }
    }
    Ok(out)
}
