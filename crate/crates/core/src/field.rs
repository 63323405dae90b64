//! Prime-field arithmetic and field-parameter selection.
//!
//! Residues are kept canonical (`0 <= v < p`) in a `u128`. Products are
//! computed with two-limb Montgomery multiplication, so any odd prime below
//! 2^127 is supported. That covers the 81-bit fields used for programs with
//! comparisons and leaves room for wider data types.

use core::fmt;

/// Default statistical security parameter, in bits.
pub const DEFAULT_KAPPA: u32 = 48;

/// Widest field the Montgomery routines accept.
pub const MAX_FIELD_BITS: u32 = 126;

/// Fixed Miller-Rabin witnesses. The first 13 primes make the test exact
/// below 3.3e24; the remaining witnesses push the error bound for wider
/// candidates far below anything observable.
const MR_WITNESSES: [u128; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldError {
    InverseOfZero,
    /// The requested modulus is not an odd prime in the supported range.
    BadModulus(u128),
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldError::InverseOfZero => write!(f, "inverse of zero"),
            FieldError::BadModulus(p) => write!(f, "unsupported field modulus {p}"),
        }
    }
}

/// Field sizing derived from a program's data widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldParams {
    pub data_bitlen: u32,
    pub kappa: u32,
    pub field_bitlen: u32,
    pub prime: u128,
}

/// Sizes the field for a program whose widest private integer has
/// `max_data_bitlen` bits. Statistically secure operations (comparisons,
/// bit decomposition) need `kappa` extra bits of headroom.
///
/// # Panics
///
/// If the resulting field would exceed [`MAX_FIELD_BITS`].
pub fn select_field_params(max_data_bitlen: u32, uses_comparison: bool, kappa: u32) -> FieldParams {
    assert!(max_data_bitlen >= 1, "data bitlength must be positive");
    let field_bitlen = if uses_comparison {
        max_data_bitlen + kappa + 1
    } else {
        max_data_bitlen + 1
    };
    assert!(
        field_bitlen <= MAX_FIELD_BITS,
        "field of {field_bitlen} bits exceeds the supported {MAX_FIELD_BITS}"
    );
    FieldParams {
        data_bitlen: max_data_bitlen,
        kappa,
        field_bitlen,
        prime: next_prime_at_least(1u128 << field_bitlen),
    }
}

/// Smallest prime `>= n`.
pub fn next_prime_at_least(n: u128) -> u128 {
    if n <= 2 {
        return 2;
    }
    let mut c = if n % 2 == 0 { n + 1 } else { n };
    while !is_prime(c) {
        c += 2;
    }
    c
}

/// Miller-Rabin with the fixed witness set in [`MR_WITNESSES`].
pub fn is_prime(n: u128) -> bool {
    if n < 2 {
        return false;
    }
    for &w in MR_WITNESSES.iter() {
        if n == w {
            return true;
        }
        if n % w == 0 {
            return false;
        }
    }
    if n >= 1u128 << 127 {
        // Outside the Montgomery range; never produced by field selection.
        return false;
    }
    let m = Montgomery::new(n);
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    let one = 1u128;
    let minus_one = n - 1;
    'witness: for &a in MR_WITNESSES.iter() {
        let a = a % n;
        if a == 0 {
            continue;
        }
        let mut x = m.pow(a, d);
        if x == one || x == minus_one {
            continue;
        }
        for _ in 1..s {
            x = m.mul(x, x);
            if x == minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Montgomery context for an odd modulus below 2^127 with `R = 2^128`.
#[derive(Debug, Clone, Copy)]
struct Montgomery {
    p: u128,
    p0: u64,
    p1: u64,
    /// `-p^{-1} mod 2^64`
    n0inv: u64,
    /// `R^2 mod p`
    r2: u128,
}

impl Montgomery {
    fn new(p: u128) -> Self {
        debug_assert!(p % 2 == 1 && p < 1u128 << 127);
        let p0 = p as u64;
        let mut inv: u64 = 1;
        for _ in 0..7 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(p0.wrapping_mul(inv)));
        }
        let r1 = (u128::MAX % p + 1) % p;
        let mut r2 = r1;
        for _ in 0..128 {
            r2 <<= 1;
            if r2 >= p {
                r2 -= p;
            }
        }
        Montgomery {
            p,
            p0,
            p1: (p >> 64) as u64,
            n0inv: inv.wrapping_neg(),
            r2,
        }
    }

    /// `a * b * R^{-1} mod p` for `a, b < p`.
    #[inline]
    fn redc_mul(&self, a: u128, b: u128) -> u128 {
        let (a0, a1) = (a as u64 as u128, (a >> 64) as u64 as u128);
        let (b0, b1) = (b as u64 as u128, (b >> 64) as u64 as u128);
        let (p0, p1) = (self.p0 as u128, self.p1 as u128);

        // t = a * b0
        let x = a0 * b0;
        let mut t0 = x as u64;
        let x = a1 * b0 + (x >> 64);
        let mut t1 = x as u64;
        let mut t2 = (x >> 64) as u64;
        // t = (t + m p) / 2^64
        let m = t0.wrapping_mul(self.n0inv) as u128;
        let x = m * p0 + t0 as u128;
        let x = m * p1 + t1 as u128 + (x >> 64);
        t0 = x as u64;
        let x = t2 as u128 + (x >> 64);
        t1 = x as u64;
        t2 = (x >> 64) as u64;

        // t += a * b1
        let x = a0 * b1 + t0 as u128;
        t0 = x as u64;
        let x = a1 * b1 + t1 as u128 + (x >> 64);
        t1 = x as u64;
        let x = t2 as u128 + (x >> 64);
        t2 = x as u64;
        let m = t0.wrapping_mul(self.n0inv) as u128;
        let x = m * p0 + t0 as u128;
        let x = m * p1 + t1 as u128 + (x >> 64);
        t0 = x as u64;
        let x = t2 as u128 + (x >> 64);
        t1 = x as u64;
        debug_assert_eq!(x >> 64, 0);

        let r = ((t1 as u128) << 64) | t0 as u128;
        if r >= self.p {
            r - self.p
        } else {
            r
        }
    }

    #[inline]
    fn mul(&self, a: u128, b: u128) -> u128 {
        self.redc_mul(self.redc_mul(a, b), self.r2)
    }

    fn pow(&self, mut base: u128, mut e: u128) -> u128 {
        let mut acc = 1u128 % self.p;
        base %= self.p;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }
}

/// A constant prepared by [`Field::prepare`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scalar(u128);

/// A canonical residue. Arithmetic goes through the owning [`Field`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FieldElement(u128);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    #[inline]
    pub fn value(self) -> u128 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Arithmetic context for one prime field.
#[derive(Debug, Clone, Copy)]
pub struct Field {
    params: FieldParams,
    mont: Montgomery,
    bits: u32,
}

impl Field {
    pub fn new(params: FieldParams) -> Result<Self, FieldError> {
        let p = params.prime;
        if p < 3 || p % 2 == 0 || p >= 1u128 << 127 || !is_prime(p) {
            return Err(FieldError::BadModulus(p));
        }
        Ok(Field {
            params,
            mont: Montgomery::new(p),
            bits: 128 - p.leading_zeros(),
        })
    }

    /// A field over an explicit prime, mostly for small exhaustive tests.
    pub fn with_prime(p: u128) -> Result<Self, FieldError> {
        let bits = 128 - p.leading_zeros();
        Field::new(FieldParams {
            data_bitlen: bits.saturating_sub(1).max(1),
            kappa: 0,
            field_bitlen: bits.saturating_sub(1),
            prime: p,
        })
    }

    pub fn params(&self) -> &FieldParams {
        &self.params
    }

    #[inline]
    pub fn prime(&self) -> u128 {
        self.mont.p
    }

    /// Bits needed to write the prime; also the width of sampled values.
    pub fn modulus_bits(&self) -> u32 {
        self.bits
    }

    /// Bytes per element on the wire.
    pub fn byte_width(&self) -> usize {
        self.bits.div_ceil(8) as usize
    }

    #[inline]
    pub fn elem(&self, v: u128) -> FieldElement {
        FieldElement(v % self.mont.p)
    }

    /// Embeds a signed integer (negative values wrap to `p - |v|`).
    pub fn from_i128(&self, v: i128) -> FieldElement {
        let p = self.mont.p;
        if v >= 0 {
            FieldElement(v as u128 % p)
        } else {
            let m = v.unsigned_abs() % p;
            FieldElement(if m == 0 { 0 } else { p - m })
        }
    }

    /// Centered lift: residues above `(p - 1) / 2` read as negative.
    pub fn to_signed(&self, a: FieldElement) -> i128 {
        let p = self.mont.p;
        if a.0 > (p - 1) / 2 {
            -((p - a.0) as i128)
        } else {
            a.0 as i128
        }
    }

    #[inline]
    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let s = a.0 + b.0;
        FieldElement(if s >= self.mont.p { s - self.mont.p } else { s })
    }

    #[inline]
    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.0 >= b.0 {
            FieldElement(a.0 - b.0)
        } else {
            FieldElement(a.0 + (self.mont.p - b.0))
        }
    }

    #[inline]
    pub fn neg(&self, a: FieldElement) -> FieldElement {
        if a.0 == 0 {
            a
        } else {
            FieldElement(self.mont.p - a.0)
        }
    }

    #[inline]
    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(self.mont.mul(a.0, b.0))
    }

    pub fn pow(&self, a: FieldElement, e: u128) -> FieldElement {
        FieldElement(self.mont.pow(a.0, e))
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, FieldError> {
        if a.0 == 0 {
            return Err(FieldError::InverseOfZero);
        }
        Ok(self.pow(a, self.mont.p - 2))
    }

    /// `2^k` as a field element.
    pub fn pow2(&self, k: u32) -> FieldElement {
        if k < 127 {
            self.elem(1u128 << k)
        } else {
            self.pow(FieldElement(2), k as u128)
        }
    }

    /// Pre-scales a constant so each later product costs one reduction.
    #[inline]
    pub fn prepare(&self, c: FieldElement) -> Scalar {
        Scalar(self.mont.redc_mul(c.0, self.mont.r2))
    }

    #[inline]
    pub fn mul_scalar(&self, s: Scalar, a: FieldElement) -> FieldElement {
        FieldElement(self.mont.redc_mul(s.0, a.0))
    }

    /// Uniform sample from the whole field.
    pub fn random<R: rand_core::RngCore + ?Sized>(&self, rng: &mut R) -> FieldElement {
        let mask = if self.bits >= 128 {
            u128::MAX
        } else {
            (1u128 << self.bits) - 1
        };
        loop {
            let lo = rng.next_u64() as u128;
            let hi = rng.next_u64() as u128;
            let v = ((hi << 64) | lo) & mask;
            if v < self.mont.p {
                return FieldElement(v);
            }
        }
    }

    /// Little-endian encoding in [`Field::byte_width`] bytes.
    pub fn write_bytes(&self, a: FieldElement, out: &mut alloc::vec::Vec<u8>) {
        let w = self.byte_width();
        out.extend_from_slice(&a.0.to_le_bytes()[..w]);
    }

    pub fn read_bytes(&self, bytes: &[u8]) -> Option<FieldElement> {
        let w = self.byte_width();
        if bytes.len() != w {
            return None;
        }
        let mut buf = [0u8; 16];
        buf[..w].copy_from_slice(bytes);
        let v = u128::from_le_bytes(buf);
        (v < self.mont.p).then_some(FieldElement(v))
    }
}
