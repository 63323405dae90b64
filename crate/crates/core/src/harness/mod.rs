//! Simulated multi-party execution: party randomness, message exchange,
//! batching, the trusted dealer, and cost accounting.
//!
//! One [`Engine`] drives all `n` parties in lockstep. Control flow of a
//! program is public, so every party takes the same path; the engine only
//! has to keep each party's shares, RNG, and outgoing messages separate.
//! Every interactive step builds one [`Frame`] per ordered party pair and
//! pushes it through a [`Transport`], which may be in-process or a real
//! socket mesh.

pub mod frame;
pub mod stats;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use smallvec::SmallVec;

use crate::field::{Field, FieldElement, Scalar};
use crate::shamir::{self, ShamirError, Shared};
pub use frame::{Frame, FrameError};
pub use stats::RoundStats;

/// Party count, threshold, seed, and statistical parameter of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartyConfig {
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub kappa: u32,
}

impl Default for PartyConfig {
    fn default() -> Self {
        PartyConfig {
            n: 3,
            t: 1,
            seed: 0,
            kappa: crate::field::DEFAULT_KAPPA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportError(pub String);

impl fmt::Display for TransportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "transport: {}", self.0)
    }
}

impl From<FrameError> for TransportError {
    fn from(e: FrameError) -> Self {
        TransportError(alloc::format!("{e}"))
    }
}

/// Delivers one round of frames. Every frame handed in must come back out
/// at its receiver; the returned order is `(receiver, sender)` ascending.
pub trait Transport {
    fn exchange(&mut self, frames: Vec<Frame>) -> Result<Vec<Frame>, TransportError>;
}

/// Delivers frames inside the process, passing each through the wire codec
/// so transcripts match the socket transport byte for byte.
#[derive(Debug, Default)]
pub struct InProcess {
    buf: Vec<u8>,
}

impl Transport for InProcess {
    fn exchange(&mut self, frames: Vec<Frame>) -> Result<Vec<Frame>, TransportError> {
        self.buf.clear();
        for f in &frames {
            f.encode_into(&mut self.buf)?;
        }
        let mut out = Vec::with_capacity(frames.len());
        let mut at = 0;
        while at < self.buf.len() {
            let (f, used) = Frame::decode(&self.buf[at..])?;
            at += used;
            out.push(f);
        }
        out.sort_by_key(|f| (f.receiver, f.sender));
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EngineError {
    Shamir(ShamirError),
    Transport(TransportError),
    /// Opened shares do not lie on a degree-t polynomial.
    InconsistentShares,
    LengthMismatch {
        left: usize,
        right: usize,
    },
    /// A received payload had the wrong size or an out-of-range element.
    BadPayload,
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Shamir(e) => write!(f, "{e}"),
            EngineError::Transport(e) => write!(f, "{e}"),
            EngineError::InconsistentShares => write!(f, "opened shares are inconsistent"),
            EngineError::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            EngineError::BadPayload => write!(f, "malformed message payload"),
        }
    }
}

impl From<ShamirError> for EngineError {
    fn from(e: ShamirError) -> Self {
        EngineError::Shamir(e)
    }
}

impl From<TransportError> for EngineError {
    fn from(e: TransportError) -> Self {
        EngineError::Transport(e)
    }
}

/// A set of degree-2 products to be reduced together in one round.
///
/// Each item is an inner product `sum x_i * y_i`; a plain multiplication is
/// the length-1 case. Parties compute their local sums when items are
/// pushed, so pushing is cheap and the batch can be arbitrarily large.
#[derive(Debug, Clone)]
pub struct Batch {
    field: Field,
    n: usize,
    /// Item-major local values: `locals[k * n + i]` is party `i`'s sum.
    locals: Vec<FieldElement>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.locals.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.locals.is_empty()
    }

    /// Adds `x * y`; returns the item's index in the result vector.
    pub fn mul(&mut self, x: &Shared, y: &Shared) -> usize {
        let f = self.field;
        let k = self.len();
        self.locals
            .extend(x.0.iter().zip(y.0.iter()).map(|(&a, &b)| f.mul(a, b)));
        k
    }

    /// Adds `sum x_i * y_i`; returns the item's index.
    pub fn dot<'a, I>(&mut self, pairs: I) -> usize
    where
        I: IntoIterator<Item = (&'a Shared, &'a Shared)>,
    {
        let f = self.field;
        let k = self.len();
        let start = self.locals.len();
        self.locals.resize(start + self.n, FieldElement::ZERO);
        for (x, y) in pairs {
            for i in 0..self.n {
                let acc = &mut self.locals[start + i];
                *acc = f.add(*acc, f.mul(x.0[i], y.0[i]));
            }
        }
        k
    }
}

/// Saved logical clock for a group of branches that share rounds.
#[derive(Debug, Clone, Copy)]
struct ParGroup {
    start: u64,
    end: u64,
}

/// Lockstep driver for all computational parties.
pub struct Engine {
    field: Field,
    n: usize,
    t: usize,
    kappa: u32,
    /// Lagrange coefficients at 0 over all `n` points.
    lambda: Vec<Scalar>,
    /// Evaluation points `1..=n`.
    points: Vec<Scalar>,
    /// `check[s][b]`: weight of share `b` (of the first `t+1`) when
    /// predicting share `t+1+s`.
    check: Vec<Vec<Scalar>>,
    party_rngs: Vec<ChaCha20Rng>,
    dealer: ChaCha20Rng,
    transport: Box<dyn Transport>,
    stats: RoundStats,
    clock: u64,
    exchanges: u64,
    next_op: u64,
    par: Vec<ParGroup>,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine")
            .field("n", &self.n)
            .field("t", &self.t)
            .field("stats", &self.stats)
            .finish_non_exhaustive()
    }
}

impl Engine {
    pub fn new(
        field: Field,
        cfg: PartyConfig,
        transport: Box<dyn Transport>,
    ) -> Result<Self, EngineError> {
        shamir::check_params(cfg.n, cfg.t)?;
        let n = cfg.n;
        let points: Vec<u16> = (1..=n as u16).collect();
        let lambda = shamir::lagrange_at_zero(&field, &points)?
            .into_iter()
            .map(|l| field.prepare(l))
            .collect();
        let check = (cfg.t + 1..n)
            .map(|s| {
                let x = field.elem(s as u128 + 1);
                (0..=cfg.t)
                    .map(|b| {
                        let xb = field.elem(b as u128 + 1);
                        let mut num = FieldElement::ONE;
                        let mut den = FieldElement::ONE;
                        for j in 0..=cfg.t {
                            if j != b {
                                let xj = field.elem(j as u128 + 1);
                                num = field.mul(num, field.sub(x, xj));
                                den = field.mul(den, field.sub(xb, xj));
                            }
                        }
                        field.prepare(field.mul(num, field.inv(den).expect("distinct points")))
                    })
                    .collect()
            })
            .collect();
        let party_rngs = (0..n)
            .map(|i| {
                let mut r = ChaCha20Rng::seed_from_u64(cfg.seed);
                r.set_stream(i as u64 + 1);
                r
            })
            .collect();
        let mut dealer = ChaCha20Rng::seed_from_u64(cfg.seed);
        dealer.set_stream(0);
        Ok(Engine {
            field,
            n,
            t: cfg.t,
            kappa: cfg.kappa,
            lambda,
            points: (1..=n as u128)
                .map(|x| field.prepare(field.elem(x)))
                .collect(),
            check,
            party_rngs,
            dealer,
            transport,
            stats: RoundStats::new(n),
            clock: 0,
            exchanges: 0,
            next_op: 0,
            par: Vec::new(),
        })
    }

    /// Engine over the in-process transport.
    pub fn in_process(field: Field, cfg: PartyConfig) -> Result<Self, EngineError> {
        Engine::new(field, cfg, Box::new(InProcess::default()))
    }

    #[inline]
    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Statistical security parameter used for masking.
    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    pub fn stats(&self) -> &RoundStats {
        &self.stats
    }

    pub fn stats_mut(&mut self) -> &mut RoundStats {
        &mut self.stats
    }

    /// Records an in-band error signal.
    pub fn diagnostic(&mut self, msg: &str) {
        log::warn!("diagnostic: {msg}");
        self.stats.diagnostics += 1;
    }

    // ----- local operations -------------------------------------------

    pub fn constant(&self, c: FieldElement) -> Shared {
        Shared::constant(self.n, c)
    }

    pub fn zero(&self) -> Shared {
        self.constant(FieldElement::ZERO)
    }

    pub fn const_i(&self, v: i128) -> Shared {
        self.constant(self.field.from_i128(v))
    }

    pub fn add(&self, a: &Shared, b: &Shared) -> Shared {
        let f = &self.field;
        Shared(a.0.iter().zip(&b.0).map(|(&x, &y)| f.add(x, y)).collect())
    }

    pub fn sub(&self, a: &Shared, b: &Shared) -> Shared {
        let f = &self.field;
        Shared(a.0.iter().zip(&b.0).map(|(&x, &y)| f.sub(x, y)).collect())
    }

    pub fn neg(&self, a: &Shared) -> Shared {
        let f = &self.field;
        Shared(a.0.iter().map(|&x| f.neg(x)).collect())
    }

    pub fn scale(&self, c: FieldElement, a: &Shared) -> Shared {
        let f = &self.field;
        Shared(a.0.iter().map(|&x| f.mul(c, x)).collect())
    }

    pub fn add_const(&self, a: &Shared, c: FieldElement) -> Shared {
        let f = &self.field;
        Shared(a.0.iter().map(|&x| f.add(x, c)).collect())
    }

    /// `1 - a`
    pub fn one_minus(&self, a: &Shared) -> Shared {
        let f = &self.field;
        Shared(a.0.iter().map(|&x| f.sub(FieldElement::ONE, x)).collect())
    }

    /// `sum c_i * v_i + c0`, computed locally.
    pub fn lincomb(&self, terms: &[(FieldElement, &Shared)], c0: FieldElement) -> Shared {
        let f = &self.field;
        let mut out = Shared::constant(self.n, c0);
        for (c, v) in terms {
            for (o, &x) in out.0.iter_mut().zip(&v.0) {
                *o = f.add(*o, f.mul(*c, x));
            }
        }
        out
    }

    /// Sum of shared values, computed locally.
    pub fn sum<'a, I: IntoIterator<Item = &'a Shared>>(&self, items: I) -> Shared {
        let f = &self.field;
        let mut out = self.zero();
        for v in items {
            for (o, &x) in out.0.iter_mut().zip(&v.0) {
                *o = f.add(*o, x);
            }
        }
        out
    }

    // ----- dealer and inputs ------------------------------------------

    /// Shares a plaintext on behalf of an input party.
    pub fn input(&mut self, v: FieldElement) -> Shared {
        Shared::from_vec(shamir::share_unchecked(
            &self.field,
            v,
            self.n,
            self.t,
            &mut self.dealer,
        ))
    }

    /// Uniform random shared bits from the trusted dealer.
    pub fn dealer_rand_bits(&mut self, count: usize) -> Vec<Shared> {
        self.stats.dealer_bits += count as u64;
        (0..count)
            .map(|_| {
                let b = self.field.elem((self.dealer.next_u32() & 1) as u128);
                Shared::from_vec(shamir::share_unchecked(
                    &self.field,
                    b,
                    self.n,
                    self.t,
                    &mut self.dealer,
                ))
            })
            .collect()
    }

    /// A shared uniform integer in `[0, 2^bits)` from the trusted dealer.
    pub fn dealer_rand_int(&mut self, bits: u32) -> Shared {
        assert!(bits < 127);
        self.stats.dealer_bits += bits as u64;
        let lo = self.dealer.next_u64() as u128;
        let hi = self.dealer.next_u64() as u128;
        let v = ((hi << 64) | lo) & ((1u128 << bits) - 1);
        let v = self.field.elem(v);
        Shared::from_vec(shamir::share_unchecked(
            &self.field,
            v,
            self.n,
            self.t,
            &mut self.dealer,
        ))
    }

    // ----- round accounting -------------------------------------------

    fn tick(&mut self, ops: u64) {
        self.clock += 1;
        self.stats.rounds = self.stats.rounds.max(self.clock);
        self.stats.interactive_ops += ops;
    }

    /// Starts a group of independent branches whose rounds overlap.
    pub fn par_begin(&mut self) {
        self.par.push(ParGroup {
            start: self.clock,
            end: self.clock,
        });
    }

    /// Starts the next branch of the innermost group.
    pub fn par_next(&mut self) {
        let g = self.par.last_mut().expect("par_next outside a group");
        g.end = g.end.max(self.clock);
        self.clock = g.start;
    }

    /// Closes the group; the clock resumes after its longest branch.
    pub fn par_end(&mut self) {
        let g = self.par.pop().expect("par_end outside a group");
        self.clock = g.end.max(self.clock);
    }

    // ----- interactive operations -------------------------------------

    pub fn batch(&self) -> Batch {
        Batch {
            field: self.field,
            n: self.n,
            locals: Vec::new(),
        }
    }

    fn send(&mut self, frames: Vec<Frame>) -> Result<Vec<Frame>, EngineError> {
        for f in &frames {
            self.stats.bytes_per_party[f.sender as usize] += f.wire_len() as u64;
        }
        let expect = frames.len();
        let got = self.transport.exchange(frames)?;
        if got.len() != expect {
            return Err(EngineError::Transport(TransportError(alloc::format!(
                "expected {expect} frames, received {}",
                got.len()
            ))));
        }
        Ok(got)
    }

    fn decode_elems(&self, payload: &[u8], count: usize) -> Result<Vec<FieldElement>, EngineError> {
        let w = self.field.byte_width();
        if payload.len() != w * count {
            return Err(EngineError::BadPayload);
        }
        payload
            .chunks_exact(w)
            .map(|c| self.field.read_bytes(c).ok_or(EngineError::BadPayload))
            .collect()
    }

    /// Degree reduction: every party reshares its local values and each
    /// receiver recombines the sub-shares with the Lagrange weights.
    pub fn run(&mut self, batch: Batch) -> Result<Vec<Shared>, EngineError> {
        let m = batch.len();
        if m == 0 {
            return Ok(Vec::new());
        }
        let (n, t) = (self.n, self.t);
        let f = self.field;
        let op_id = self.next_op;
        self.next_op += m as u64;
        self.exchanges += 1;

        // sub[i][j][k]: party i's sub-share of item k for party j.
        let mut sub: Vec<Vec<Vec<FieldElement>>> = vec![vec![Vec::with_capacity(m); n]; n];
        let mut coeffs = vec![FieldElement::ZERO; t + 1];
        for i in 0..n {
            for k in 0..m {
                coeffs[0] = batch.locals[k * n + i];
                for c in coeffs.iter_mut().skip(1) {
                    *c = f.random(&mut self.party_rngs[i]);
                }
                for (j, &x) in self.points.iter().enumerate() {
                    let v = coeffs[..t]
                        .iter()
                        .rev()
                        .fold(coeffs[t], |acc, &c| f.add(f.mul_scalar(x, acc), c));
                    sub[i][j].push(v);
                }
            }
        }
        let mut frames = Vec::with_capacity(n * (n - 1));
        for (i, row) in sub.iter().enumerate() {
            for (j, vals) in row.iter().enumerate() {
                if i != j {
                    let mut payload = Vec::with_capacity(vals.len() * f.byte_width());
                    for &v in vals {
                        f.write_bytes(v, &mut payload);
                    }
                    frames.push(Frame {
                        round: self.exchanges,
                        op_id,
                        sender: i as u16,
                        receiver: j as u16,
                        payload,
                    });
                }
            }
        }
        let delivered = self.send(frames)?;
        let mut out: Vec<Shared> = (0..m)
            .map(|_| Shared(SmallVec::from_elem(FieldElement::ZERO, n)))
            .collect();
        // Each party first folds in its own sub-share, then the received ones.
        for j in 0..n {
            let l = self.lambda[j];
            for (k, o) in out.iter_mut().enumerate() {
                o.0[j] = f.mul_scalar(l, sub[j][j][k]);
            }
        }
        for fr in &delivered {
            let (i, j) = (fr.sender as usize, fr.receiver as usize);
            if i >= n || j >= n {
                return Err(EngineError::BadPayload);
            }
            let vals = self.decode_elems(&fr.payload, m)?;
            let l = self.lambda[i];
            for (o, v) in out.iter_mut().zip(vals) {
                o.0[j] = f.add(o.0[j], f.mul_scalar(l, v));
            }
        }
        self.tick(m as u64);
        Ok(out)
    }

    pub fn mul(&mut self, x: &Shared, y: &Shared) -> Result<Shared, EngineError> {
        let mut b = self.batch();
        b.mul(x, y);
        Ok(self.run(b)?.pop().unwrap())
    }

    /// Pairwise products in one round.
    pub fn mul_many(&mut self, pairs: &[(&Shared, &Shared)]) -> Result<Vec<Shared>, EngineError> {
        let mut b = self.batch();
        for (x, y) in pairs {
            b.mul(x, y);
        }
        self.run(b)
    }

    /// `sum xs_i * ys_i` as one interactive operation.
    pub fn inner_product(&mut self, xs: &[Shared], ys: &[Shared]) -> Result<Shared, EngineError> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(EngineError::LengthMismatch {
                left: xs.len(),
                right: ys.len(),
            });
        }
        let mut b = self.batch();
        b.dot(xs.iter().zip(ys));
        Ok(self.run(b)?.pop().unwrap())
    }

    /// Opens values to all parties in one round; each party reconstructs on
    /// its own and checks that what it received is consistent.
    pub fn open_many(&mut self, vals: &[Shared]) -> Result<Vec<FieldElement>, EngineError> {
        let m = vals.len();
        if m == 0 {
            return Ok(Vec::new());
        }
        let (n, t) = (self.n, self.t);
        let f = self.field;
        let op_id = self.next_op;
        self.next_op += m as u64;
        self.exchanges += 1;
        let mut frames = Vec::with_capacity(n * (n - 1));
        for i in 0..n {
            let mut payload = Vec::with_capacity(m * f.byte_width());
            for v in vals {
                f.write_bytes(v.0[i], &mut payload);
            }
            for j in 0..n {
                if i != j {
                    frames.push(Frame {
                        round: self.exchanges,
                        op_id,
                        sender: i as u16,
                        receiver: j as u16,
                        payload: payload.clone(),
                    });
                }
            }
        }
        let delivered = self.send(frames)?;
        // view[j][i][k]: share of item k from party i as seen by party j.
        let mut view: Vec<Vec<Vec<FieldElement>>> = vec![vec![Vec::new(); n]; n];
        for (j, v) in view.iter_mut().enumerate() {
            v[j] = vals.iter().map(|s| s.0[j]).collect();
        }
        for fr in &delivered {
            let (i, j) = (fr.sender as usize, fr.receiver as usize);
            if i >= n || j >= n {
                return Err(EngineError::BadPayload);
            }
            view[j][i] = self.decode_elems(&fr.payload, m)?;
        }
        let mut result: Option<Vec<FieldElement>> = None;
        for v in &view {
            let mut opened = Vec::with_capacity(m);
            for k in 0..m {
                for (s, w) in self.check.iter().enumerate() {
                    let predicted = (0..=t).fold(FieldElement::ZERO, |acc, b| {
                        f.add(acc, f.mul_scalar(w[b], v[b][k]))
                    });
                    if predicted != v[t + 1 + s][k] {
                        return Err(EngineError::InconsistentShares);
                    }
                }
                let s = (0..n).fold(FieldElement::ZERO, |acc, i| {
                    f.add(acc, f.mul_scalar(self.lambda[i], v[i][k]))
                });
                opened.push(s);
            }
            match &result {
                None => result = Some(opened),
                Some(r) if *r != opened => return Err(EngineError::InconsistentShares),
                Some(_) => {}
            }
        }
        self.tick(m as u64);
        Ok(result.unwrap())
    }

    pub fn open(&mut self, v: &Shared) -> Result<FieldElement, EngineError> {
        Ok(self.open_many(core::slice::from_ref(v))?.pop().unwrap())
    }

    /// Reconstructs a value for an output party. Output delivery is not an
    /// interactive operation between computational parties and is not
    /// counted.
    pub fn reveal(&self, v: &Shared) -> FieldElement {
        let f = &self.field;
        (0..self.n).fold(FieldElement::ZERO, |acc, i| {
            f.add(acc, f.mul_scalar(self.lambda[i], v.0[i]))
        })
    }

    /// Reveal with the centered signed interpretation.
    pub fn reveal_signed(&self, v: &Shared) -> i128 {
        self.field.to_signed(self.reveal(v))
    }
}
