//! Ground fields, the graded monoid with its action homomorphism, and
//! truncated Novikov arithmetic.
//!
//! A Novikov element is a finite formal sum over a finitely generated monoid
//! `Z^r` with exact rational action values, together with an explicit
//! precision cutoff `E`: terms of action at or above `E` are unknown rather
//! than zero. All operations propagate the cutoff pessimistically, so silent
//! precision loss cannot occur.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

pub type Rat = BigRational;

/// Element of the monoid `Z^r`, as an exponent vector.
pub type GammaElt = Vec<i64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoeffError {
    #[error("field mismatch: {0} vs {1}")]
    FieldMismatch(BaseField, BaseField),
    #[error("monoid mismatch: rank {0} vs {1}")]
    MonoidMismatch(usize, usize),
    #[error("exponent vector has length {got}, monoid rank is {want}")]
    RankMismatch { got: usize, want: usize },
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("element is not unipotent: {0}")]
    NotUnipotent(String),
    #[error("cutoff must be positive, got {0}")]
    InvalidCutoff(Rat),
    #[error("parse error: {0}")]
    Parse(String),
}

fn mulmod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn powmod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64 % p;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, a, p);
        }
        a = mulmod(a, a, p);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin for u64.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// The ground field: the rationals or a prime field F_p.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseField {
    Rationals,
    Prime(u64),
}

impl BaseField {
    pub fn prime(p: u64) -> Result<Self, CoeffError> {
        if is_prime(p) {
            Ok(BaseField::Prime(p))
        } else {
            Err(CoeffError::NotPrime(p))
        }
    }

    pub fn characteristic(&self) -> u64 {
        match self {
            BaseField::Rationals => 0,
            BaseField::Prime(p) => *p,
        }
    }

    pub fn zero(&self) -> Scalar {
        match self {
            BaseField::Rationals => Scalar::Q(Rat::zero()),
            BaseField::Prime(p) => Scalar::Fp { p: *p, val: 0 },
        }
    }

    pub fn one(&self) -> Scalar {
        match self {
            BaseField::Rationals => Scalar::Q(Rat::one()),
            BaseField::Prime(p) => Scalar::Fp { p: *p, val: 1 % p },
        }
    }

    pub fn from_i64(&self, n: i64) -> Scalar {
        match self {
            BaseField::Rationals => Scalar::Q(Rat::from_integer(BigInt::from(n))),
            BaseField::Prime(p) => {
                let v = n.rem_euclid(*p as i64) as u64;
                Scalar::Fp { p: *p, val: v }
            }
        }
    }
}

impl fmt::Display for BaseField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseField::Rationals => write!(f, "q"),
            BaseField::Prime(2) => write!(f, "f2"),
            BaseField::Prime(p) => write!(f, "fp:{p}"),
        }
    }
}

impl FromStr for BaseField {
    type Err = CoeffError;
    fn from_str(s: &str) -> Result<Self, CoeffError> {
        match s {
            "q" | "Q" => Ok(BaseField::Rationals),
            "f2" | "F2" => Ok(BaseField::Prime(2)),
            _ => {
                if let Some(rest) = s.strip_prefix("fp:") {
                    let p: u64 = rest
                        .parse()
                        .map_err(|_| CoeffError::Parse(format!("bad prime in `{s}`")))?;
                    BaseField::prime(p)
                } else {
                    Err(CoeffError::Parse(format!("unknown field `{s}`")))
                }
            }
        }
    }
}

/// An exact field element. Mixing fields in arithmetic is a programming
/// error and panics; boundaries that accept external data must validate
/// with [`Scalar::field`] first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Scalar {
    Q(Rat),
    Fp { p: u64, val: u64 },
}

impl Scalar {
    pub fn field(&self) -> BaseField {
        match self {
            Scalar::Q(_) => BaseField::Rationals,
            Scalar::Fp { p, .. } => BaseField::Prime(*p),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Q(r) => r.is_zero(),
            Scalar::Fp { val, .. } => *val == 0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Scalar::Q(r) => r.is_one(),
            Scalar::Fp { val, .. } => *val == 1,
        }
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Q(a), Scalar::Q(b)) => Scalar::Q(a + b),
            (Scalar::Fp { p, val: a }, Scalar::Fp { p: q, val: b }) if p == q => Scalar::Fp {
                p: *p,
                val: (a + b) % p,
            },
            _ => panic!("scalar field mismatch: {} vs {}", self.field(), other.field()),
        }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Q(a) => Scalar::Q(-a),
            Scalar::Fp { p, val } => Scalar::Fp {
                p: *p,
                val: (p - val) % p,
            },
        }
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Q(a), Scalar::Q(b)) => Scalar::Q(a * b),
            (Scalar::Fp { p, val: a }, Scalar::Fp { p: q, val: b }) if p == q => Scalar::Fp {
                p: *p,
                val: mulmod(*a, *b, *p),
            },
            _ => panic!("scalar field mismatch: {} vs {}", self.field(), other.field()),
        }
    }

    pub fn inv(&self) -> Option<Scalar> {
        match self {
            Scalar::Q(a) => {
                if a.is_zero() {
                    None
                } else {
                    Some(Scalar::Q(a.recip()))
                }
            }
            Scalar::Fp { p, val } => {
                if *val == 0 {
                    None
                } else {
                    Some(Scalar::Fp {
                        p: *p,
                        val: powmod(*val, p - 2, *p),
                    })
                }
            }
        }
    }

    pub fn div(&self, other: &Scalar) -> Scalar {
        self.mul(&other.inv().expect("division by zero scalar"))
    }

    /// Parse in the same field-tagged form produced by Display: rationals as
    /// `num` or `num/den`, prime-field residues as plain integers.
    pub fn parse(field: BaseField, s: &str) -> Result<Scalar, CoeffError> {
        match field {
            BaseField::Rationals => {
                let r = parse_rat(s)?;
                Ok(Scalar::Q(r))
            }
            BaseField::Prime(p) => {
                let v: i64 = s
                    .parse()
                    .map_err(|_| CoeffError::Parse(format!("bad residue `{s}`")))?;
                Ok(Scalar::Fp {
                    p,
                    val: v.rem_euclid(p as i64) as u64,
                })
            }
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Q(r) => {
                if r.denom().is_one() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Scalar::Fp { val, .. } => write!(f, "{val}"),
        }
    }
}

/// Exact rationals are serialized as `num/den` (or `num` when integral).
pub fn parse_rat(s: &str) -> Result<Rat, CoeffError> {
    let s = s.trim();
    if s == "inf" || s == "oo" {
        return Err(CoeffError::Parse("infinite value where rational expected".into()));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| CoeffError::Parse(format!("bad numerator `{n}`")))?;
        let d = BigInt::from_str(d.trim()).map_err(|_| CoeffError::Parse(format!("bad denominator `{d}`")))?;
        if d.is_zero() {
            return Err(CoeffError::Parse("zero denominator".into()));
        }
        Ok(Rat::new(n, d))
    } else {
        let n = BigInt::from_str(s).map_err(|_| CoeffError::Parse(format!("bad rational `{s}`")))?;
        Ok(Rat::from_integer(n))
    }
}

pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// The finitely generated monoid `Z^r` with a rational action vector.
///
/// The positivity cone consists of the exponent vectors with non-negative
/// action. Leading-term extraction uses the total order "action value, then
/// lexicographic", which refines the action homomorphism and breaks its ties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaMonoid {
    rank: usize,
    action: Vec<Rat>,
}

impl GammaMonoid {
    pub fn new(action: Vec<Rat>) -> Self {
        GammaMonoid {
            rank: action.len(),
            action,
        }
    }

    /// The rank-0 monoid: Novikov arithmetic degenerates to the ground field.
    pub fn trivial() -> Arc<Self> {
        Arc::new(GammaMonoid::new(vec![]))
    }

    /// Z with the tautological action, the workhorse for graded fixtures.
    pub fn standard_z() -> Arc<Self> {
        Arc::new(GammaMonoid::new(vec![Rat::one()]))
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn action_vector(&self) -> &[Rat] {
        &self.action
    }

    pub fn zero(&self) -> GammaElt {
        vec![0; self.rank]
    }

    /// The action homomorphism `A . gamma`.
    pub fn action(&self, gamma: &[i64]) -> Result<Rat, CoeffError> {
        if gamma.len() != self.rank {
            return Err(CoeffError::RankMismatch {
                got: gamma.len(),
                want: self.rank,
            });
        }
        let mut acc = Rat::zero();
        for (a, g) in self.action.iter().zip(gamma) {
            acc += a * Rat::from_integer(BigInt::from(*g));
        }
        Ok(acc)
    }

    pub fn add(&self, a: &[i64], b: &[i64]) -> GammaElt {
        debug_assert_eq!(a.len(), self.rank);
        debug_assert_eq!(b.len(), self.rank);
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    pub fn sub(&self, a: &[i64], b: &[i64]) -> GammaElt {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    pub fn in_positive_cone(&self, gamma: &[i64]) -> bool {
        self.action(gamma).map(|a| !a.is_negative()).unwrap_or(false)
    }

    /// Total order: action value first, lexicographic on the exponent vector
    /// as the tiebreak.
    pub fn cmp(&self, a: &[i64], b: &[i64]) -> Ordering {
        let aa = self.action(a).expect("rank-checked");
        let ab = self.action(b).expect("rank-checked");
        aa.cmp(&ab).then_with(|| a.cmp(b))
    }
}

/// Precision cutoff: all terms with action at or above the cutoff are
/// unknown. `Infinite` means the element is exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cutoff {
    Finite(Rat),
    Infinite,
}

impl Cutoff {
    pub fn min(self, other: Cutoff) -> Cutoff {
        match (self, other) {
            (Cutoff::Infinite, o) => o,
            (s, Cutoff::Infinite) => s,
            (Cutoff::Finite(a), Cutoff::Finite(b)) => Cutoff::Finite(a.min(b)),
        }
    }

    pub fn shift(&self, by: &Cutoff) -> Cutoff {
        match (self, by) {
            (Cutoff::Finite(a), Cutoff::Finite(b)) => Cutoff::Finite(a + b),
            _ => Cutoff::Infinite,
        }
    }

    pub fn admits(&self, action: &Rat) -> bool {
        match self {
            Cutoff::Infinite => true,
            Cutoff::Finite(e) => action < e,
        }
    }

    pub fn as_finite(&self) -> Option<&Rat> {
        match self {
            Cutoff::Finite(e) => Some(e),
            Cutoff::Infinite => None,
        }
    }
}

impl PartialOrd for Cutoff {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(match (self, other) {
            (Cutoff::Infinite, Cutoff::Infinite) => Ordering::Equal,
            (Cutoff::Infinite, _) => Ordering::Greater,
            (_, Cutoff::Infinite) => Ordering::Less,
            (Cutoff::Finite(a), Cutoff::Finite(b)) => a.cmp(b),
        })
    }
}

impl fmt::Display for Cutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cutoff::Finite(e) => write!(f, "{}", fmt_rat(e)),
            Cutoff::Infinite => write!(f, "inf"),
        }
    }
}

/// Valuation of a Novikov element: the minimal action in its support, or
/// infinite for the element that is zero up to its cutoff.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Valuation {
    Finite(Rat),
    Infinite,
}

/// A truncated Novikov element: a finite sum of `c * T^gamma` with exact
/// field coefficients, valid below the precision cutoff.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NovikovElement {
    monoid: Arc<GammaMonoid>,
    field: BaseField,
    /// Sorted by the monoid's total order; coefficients nonzero; every term
    /// has action strictly below the cutoff.
    terms: Vec<(GammaElt, Scalar)>,
    cutoff: Cutoff,
}

impl NovikovElement {
    pub fn zero(monoid: Arc<GammaMonoid>, field: BaseField) -> Self {
        NovikovElement {
            monoid,
            field,
            terms: vec![],
            cutoff: Cutoff::Infinite,
        }
    }

    pub fn one(monoid: Arc<GammaMonoid>, field: BaseField) -> Self {
        let z = monoid.zero();
        NovikovElement {
            monoid,
            field,
            terms: vec![(z, field.one())],
            cutoff: Cutoff::Infinite,
        }
    }

    pub fn scalar(monoid: Arc<GammaMonoid>, c: Scalar) -> Self {
        let field = c.field();
        let z = monoid.zero();
        NovikovElement::from_terms(monoid, field, vec![(z, c)], Cutoff::Infinite)
            .expect("zero exponent always has the right rank")
    }

    /// Single term `c * T^gamma`.
    pub fn monomial(
        monoid: Arc<GammaMonoid>,
        gamma: GammaElt,
        c: Scalar,
    ) -> Result<Self, CoeffError> {
        let field = c.field();
        NovikovElement::from_terms(monoid, field, vec![(gamma, c)], Cutoff::Infinite)
    }

    pub fn from_terms(
        monoid: Arc<GammaMonoid>,
        field: BaseField,
        terms: Vec<(GammaElt, Scalar)>,
        cutoff: Cutoff,
    ) -> Result<Self, CoeffError> {
        for (g, c) in &terms {
            monoid.action(g)?;
            if c.field() != field {
                return Err(CoeffError::FieldMismatch(c.field(), field));
            }
        }
        let mut el = NovikovElement {
            monoid,
            field,
            terms,
            cutoff,
        };
        el.normalize();
        Ok(el)
    }

    fn normalize(&mut self) {
        let monoid = self.monoid.clone();
        let mut merged: Vec<(GammaElt, Scalar)> = vec![];
        self.terms.sort_by(|a, b| monoid.cmp(&a.0, &b.0));
        for (g, c) in self.terms.drain(..) {
            let act = monoid.action(&g).expect("rank-checked at construction");
            if !self.cutoff.admits(&act) {
                continue;
            }
            match merged.last_mut() {
                Some((lg, lc)) if *lg == g => {
                    *lc = lc.add(&c);
                }
                _ => merged.push((g, c)),
            }
        }
        merged.retain(|(_, c)| !c.is_zero());
        self.terms = merged;
    }

    pub fn monoid(&self) -> &Arc<GammaMonoid> {
        &self.monoid
    }

    pub fn field(&self) -> BaseField {
        self.field
    }

    pub fn cutoff(&self) -> &Cutoff {
        &self.cutoff
    }

    pub fn terms(&self) -> &[(GammaElt, Scalar)] {
        &self.terms
    }

    /// True when the support is empty and the element is exact. An element
    /// with empty support but finite cutoff is only known to vanish below the
    /// cutoff.
    pub fn is_exactly_zero(&self) -> bool {
        self.terms.is_empty() && self.cutoff == Cutoff::Infinite
    }

    pub fn is_zero_below_cutoff(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn valuation(&self) -> Valuation {
        match self.terms.first() {
            Some((g, _)) => Valuation::Finite(self.monoid.action(g).expect("rank-checked")),
            None => Valuation::Infinite,
        }
    }

    /// Lower bound on the valuation usable for precision propagation: the
    /// leading action, or the cutoff when the support is empty.
    fn val_floor(&self) -> Cutoff {
        match self.terms.first() {
            Some((g, _)) => Cutoff::Finite(self.monoid.action(g).expect("rank-checked")),
            None => self.cutoff.clone(),
        }
    }

    /// Leading term under the total order (action, then lexicographic).
    pub fn leading_term(&self) -> Option<(&GammaElt, &Scalar)> {
        self.terms.first().map(|(g, c)| (g, c))
    }

    pub fn truncate(&self, cutoff: Cutoff) -> NovikovElement {
        let mut out = self.clone();
        out.cutoff = out.cutoff.min(cutoff);
        out.normalize();
        out
    }

    fn check_compat(&self, other: &NovikovElement) -> Result<(), CoeffError> {
        if self.field != other.field {
            return Err(CoeffError::FieldMismatch(self.field, other.field));
        }
        if self.monoid.rank() != other.monoid.rank()
            || self.monoid.action_vector() != other.monoid.action_vector()
        {
            return Err(CoeffError::MonoidMismatch(
                self.monoid.rank(),
                other.monoid.rank(),
            ));
        }
        Ok(())
    }

    /// Coefficientwise sum. The cutoff drops to the smaller of the two.
    pub fn add(&self, other: &NovikovElement) -> Result<NovikovElement, CoeffError> {
        self.check_compat(other)?;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        NovikovElement::from_terms(
            self.monoid.clone(),
            self.field,
            terms,
            self.cutoff.clone().min(other.cutoff.clone()),
        )
    }

    pub fn neg(&self) -> NovikovElement {
        let mut out = self.clone();
        for (_, c) in &mut out.terms {
            *c = c.neg();
        }
        out
    }

    pub fn sub(&self, other: &NovikovElement) -> Result<NovikovElement, CoeffError> {
        self.add(&other.neg())
    }

    /// Convolution product. The cutoff is the valuation-shifted minimum
    /// `min(E_a + val(b), E_b + val(a))`.
    pub fn mul(&self, other: &NovikovElement) -> Result<NovikovElement, CoeffError> {
        self.check_compat(other)?;
        let cutoff = self
            .cutoff
            .clone()
            .shift(&other.val_floor())
            .min(other.cutoff.clone().shift(&self.val_floor()));
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (g1, c1) in &self.terms {
            for (g2, c2) in &other.terms {
                terms.push((self.monoid.add(g1, g2), c1.mul(c2)));
            }
        }
        NovikovElement::from_terms(self.monoid.clone(), self.field, terms, cutoff)
    }

    pub fn scale(&self, c: &Scalar) -> NovikovElement {
        assert_eq!(c.field(), self.field, "scalar field mismatch");
        let mut out = self.clone();
        for (_, coeff) in &mut out.terms {
            *coeff = coeff.mul(c);
        }
        out.normalize();
        out
    }

    /// Inverse of a unipotent element by truncated geometric series.
    ///
    /// The input must be `u + n` with `u` an invertible scalar at the zero
    /// exponent and `val(n) > 0`; each series term raises the valuation by
    /// `val(n)`, so the computation finishes in finitely many steps. The
    /// result `b` satisfies `a * b = 1 + O(T^E)`.
    pub fn invert_unipotent(&self, target: &Rat) -> Result<NovikovElement, CoeffError> {
        if !target.is_positive() {
            return Err(CoeffError::InvalidCutoff(target.clone()));
        }
        let zero_exp = self.monoid.zero();
        let unit = self
            .terms
            .iter()
            .find(|(g, _)| *g == zero_exp)
            .map(|(_, c)| c.clone())
            .ok_or_else(|| CoeffError::NotUnipotent("no term at the zero exponent".into()))?;
        let unit_inv = unit
            .inv()
            .ok_or_else(|| CoeffError::NotUnipotent("zero-exponent coefficient not invertible".into()))?;
        let cutoff = Cutoff::Finite(target.clone()).min(self.cutoff.clone());
        // tail = a/u - 1, everything of positive action
        let one = NovikovElement::one(self.monoid.clone(), self.field);
        let tail = self.scale(&unit_inv).sub(&one)?.truncate(cutoff.clone());
        if let Some((g, _)) = tail.leading_term() {
            let act = self.monoid.action(g)?;
            if !act.is_positive() {
                return Err(CoeffError::NotUnipotent(format!(
                    "term T^{:?} has non-positive action {}",
                    g,
                    fmt_rat(&act)
                )));
            }
        }
        // geometric series in -tail
        let mut series = one.truncate(cutoff.clone());
        let mut power = tail.neg();
        while !power.is_zero_below_cutoff() {
            series = series.add(&power)?;
            power = power.mul(&tail.neg())?.truncate(cutoff.clone());
        }
        Ok(series.scale(&unit_inv).truncate(cutoff))
    }

    /// Coefficient at a given exponent (zero scalar if absent from support).
    pub fn coeff(&self, gamma: &[i64]) -> Scalar {
        self.terms
            .iter()
            .find(|(g, _)| g.as_slice() == gamma)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(|| self.field.zero())
    }

    /// Textual serialization: `+`-separated `coeff*T^(g1,...,gr)` terms with
    /// a trailing `O(E)` when the cutoff is finite.
    pub fn to_text(&self) -> String {
        let mut parts: Vec<String> = vec![];
        for (g, c) in &self.terms {
            if g.iter().all(|&x| x == 0) {
                parts.push(format!("{c}"));
            } else {
                let exps = g.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
                parts.push(format!("{c}*T^({exps})"));
            }
        }
        if let Cutoff::Finite(e) = &self.cutoff {
            parts.push(format!("O({})", fmt_rat(e)));
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }

    pub fn from_text(
        monoid: Arc<GammaMonoid>,
        field: BaseField,
        s: &str,
    ) -> Result<NovikovElement, CoeffError> {
        let mut terms = vec![];
        let mut cutoff = Cutoff::Infinite;
        for part in s.split('+') {
            let part = part.trim();
            if part.is_empty() || part == "0" {
                continue;
            }
            if let Some(inner) = part.strip_prefix("O(").and_then(|r| r.strip_suffix(')')) {
                cutoff = Cutoff::Finite(parse_rat(inner)?);
                continue;
            }
            if let Some((c, g)) = part.split_once("*T^(") {
                let g = g
                    .strip_suffix(')')
                    .ok_or_else(|| CoeffError::Parse(format!("unterminated exponent in `{part}`")))?;
                let gamma: Result<Vec<i64>, _> = g
                    .split(',')
                    .map(|x| x.trim().parse::<i64>())
                    .collect();
                let gamma = gamma.map_err(|_| CoeffError::Parse(format!("bad exponent `{g}`")))?;
                terms.push((gamma, Scalar::parse(field, c.trim())?));
            } else {
                terms.push((monoid.zero(), Scalar::parse(field, part)?));
            }
        }
        NovikovElement::from_terms(monoid, field, terms, cutoff)
    }
}

impl fmt::Display for NovikovElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rat {
        Rat::new(BigInt::from(n), BigInt::from(d))
    }

    fn qs(n: i64) -> Scalar {
        Scalar::Q(Rat::from_integer(BigInt::from(n)))
    }

    #[test]
    fn action_is_the_dot_product() {
        let m = GammaMonoid::new(vec![Rat::one()]);
        assert_eq!(m.action(&[3]).unwrap(), q(3, 1));
        let m = GammaMonoid::new(vec![Rat::one(), -Rat::one()]);
        assert_eq!(m.action(&[2, 2]).unwrap(), Rat::zero());
        let m = GammaMonoid::new(vec![q(1, 2)]);
        assert_eq!(m.action(&[5]).unwrap(), q(5, 2));
        assert!(m.action(&[1, 2]).is_err());
    }

    #[test]
    fn add_cancels_and_respects_cutoff() {
        let m = GammaMonoid::standard_z();
        let f = BaseField::Rationals;
        let one_plus_t = NovikovElement::from_terms(
            m.clone(),
            f,
            vec![(vec![0], qs(1)), (vec![1], qs(1))],
            Cutoff::Infinite,
        )
        .unwrap();
        let minus_t =
            NovikovElement::from_terms(m.clone(), f, vec![(vec![1], qs(-1))], Cutoff::Infinite)
                .unwrap();
        let sum = one_plus_t.add(&minus_t).unwrap();
        assert_eq!(sum, NovikovElement::one(m.clone(), f));
        assert_eq!(*sum.cutoff(), Cutoff::Infinite);

        // (1 + O(T^2)) + T^2 = 1 + O(T^2): the tail is absorbed by the cutoff
        let one_trunc = NovikovElement::from_terms(
            m.clone(),
            f,
            vec![(vec![0], qs(1))],
            Cutoff::Finite(q(2, 1)),
        )
        .unwrap();
        let t2 =
            NovikovElement::from_terms(m.clone(), f, vec![(vec![2], qs(1))], Cutoff::Infinite)
                .unwrap();
        let sum = one_trunc.add(&t2).unwrap();
        assert_eq!(sum.terms().len(), 1);
        assert_eq!(*sum.cutoff(), Cutoff::Finite(q(2, 1)));

        let x = one_plus_t.clone();
        let zero = NovikovElement::zero(m.clone(), f);
        assert_eq!(zero.add(&x).unwrap(), x);
    }

    #[test]
    fn mul_convolves_and_shifts_precision() {
        let m = GammaMonoid::standard_z();
        let f = BaseField::Rationals;
        let a = NovikovElement::from_terms(
            m.clone(),
            f,
            vec![(vec![0], qs(1)), (vec![1], qs(1))],
            Cutoff::Infinite,
        )
        .unwrap();
        let b = NovikovElement::from_terms(
            m.clone(),
            f,
            vec![(vec![0], qs(1)), (vec![1], qs(-1))],
            Cutoff::Infinite,
        )
        .unwrap();
        let prod = a.mul(&b).unwrap();
        assert_eq!(prod.coeff(&[0]), qs(1));
        assert_eq!(prod.coeff(&[1]), qs(0));
        assert_eq!(prod.coeff(&[2]), qs(-1));

        // monomials
        let ta = NovikovElement::monomial(m.clone(), vec![2], qs(1)).unwrap();
        let tb = NovikovElement::monomial(m.clone(), vec![3], qs(1)).unwrap();
        let tt = ta.mul(&tb).unwrap();
        assert_eq!(tt.terms(), &[(vec![5], qs(1))]);

        // (1 + O(T)) * T = T + O(T^2)
        let one_o_t = NovikovElement::from_terms(
            m.clone(),
            f,
            vec![(vec![0], qs(1))],
            Cutoff::Finite(q(1, 1)),
        )
        .unwrap();
        let t = NovikovElement::monomial(m.clone(), vec![1], qs(1)).unwrap();
        let shifted = one_o_t.mul(&t).unwrap();
        assert_eq!(shifted.coeff(&[1]), qs(1));
        assert_eq!(*shifted.cutoff(), Cutoff::Finite(q(2, 1)));
    }

    #[test]
    fn invert_geometric_series() {
        let m = GammaMonoid::standard_z();
        let f = BaseField::Rationals;
        // a = 1 - T, E = 3: inverse is 1 + T + T^2 + O(T^3)
        let a = NovikovElement::from_terms(
            m.clone(),
            f,
            vec![(vec![0], qs(1)), (vec![1], qs(-1))],
            Cutoff::Infinite,
        )
        .unwrap();
        let b = a.invert_unipotent(&q(3, 1)).unwrap();
        assert_eq!(b.coeff(&[0]), qs(1));
        assert_eq!(b.coeff(&[1]), qs(1));
        assert_eq!(b.coeff(&[2]), qs(1));
        assert_eq!(*b.cutoff(), Cutoff::Finite(q(3, 1)));

        // a = 1 inverts to 1
        let one = NovikovElement::one(m.clone(), f);
        let inv = one.invert_unipotent(&q(7, 1)).unwrap();
        assert_eq!(inv.coeff(&[0]), qs(1));
        assert!(inv.terms().len() == 1);
    }

    #[test]
    fn invert_two_plus_t_checked_by_multiplication() {
        // a = 2 + T over Q, E = 2 gives 1/2 - T/4 + O(T^2); the check is
        // multiplying back.
        let m = GammaMonoid::standard_z();
        let f = BaseField::Rationals;
        let a = NovikovElement::from_terms(
            m.clone(),
            f,
            vec![(vec![0], qs(2)), (vec![1], qs(1))],
            Cutoff::Infinite,
        )
        .unwrap();
        let b = a.invert_unipotent(&q(2, 1)).unwrap();
        assert_eq!(b.coeff(&[0]), Scalar::Q(q(1, 2)));
        assert_eq!(b.coeff(&[1]), Scalar::Q(q(-1, 4)));
        let prod = a.mul(&b).unwrap();
        assert!(prod.sub(&NovikovElement::one(m, f)).unwrap().is_zero_below_cutoff());
        assert_eq!(*prod.cutoff(), Cutoff::Finite(q(2, 1)));
    }

    #[test]
    fn not_unipotent_is_rejected() {
        let m = GammaMonoid::standard_z();
        let t = NovikovElement::monomial(m.clone(), vec![1], qs(1)).unwrap();
        assert!(matches!(
            t.invert_unipotent(&q(2, 1)),
            Err(CoeffError::NotUnipotent(_))
        ));
        // zero-action but nonzero exponent in the tail
        let m2 = Arc::new(GammaMonoid::new(vec![Rat::one(), -Rat::one()]));
        let a = NovikovElement::from_terms(
            m2.clone(),
            BaseField::Rationals,
            vec![(vec![0, 0], qs(1)), (vec![1, 1], qs(1))],
            Cutoff::Infinite,
        )
        .unwrap();
        assert!(a.invert_unipotent(&q(2, 1)).is_err());
    }

    #[test]
    fn mismatches_are_errors() {
        let m = GammaMonoid::standard_z();
        let a = NovikovElement::one(m.clone(), BaseField::Rationals);
        let b = NovikovElement::one(m.clone(), BaseField::Prime(2));
        assert!(matches!(a.add(&b), Err(CoeffError::FieldMismatch(..))));
        let m2 = Arc::new(GammaMonoid::new(vec![Rat::one(), Rat::one()]));
        let c = NovikovElement::one(m2, BaseField::Rationals);
        assert!(matches!(a.mul(&c), Err(CoeffError::MonoidMismatch(..))));
    }

    #[test]
    fn valuation_laws() {
        let m = GammaMonoid::standard_z();
        let f = BaseField::Rationals;
        let a = NovikovElement::from_terms(
            m.clone(),
            f,
            vec![(vec![1], qs(3)), (vec![2], qs(5))],
            Cutoff::Infinite,
        )
        .unwrap();
        let b = NovikovElement::from_terms(
            m.clone(),
            f,
            vec![(vec![2], qs(-5))],
            Cutoff::Infinite,
        )
        .unwrap();
        assert_eq!(a.valuation(), Valuation::Finite(q(1, 1)));
        // val(ab) = val(a) + val(b) for unique leading terms
        let ab = a.mul(&b).unwrap();
        assert_eq!(ab.valuation(), Valuation::Finite(q(3, 1)));
        // val(a+b) >= min: here cancellation raises the valuation
        let t2 = NovikovElement::from_terms(m, f, vec![(vec![2], qs(5))], Cutoff::Infinite).unwrap();
        let s = t2.add(&b).unwrap();
        assert_eq!(s.valuation(), Valuation::Infinite);
    }

    #[test]
    fn text_roundtrip() {
        let m = Arc::new(GammaMonoid::new(vec![Rat::one(), q(1, 2)]));
        let f = BaseField::Rationals;
        let a = NovikovElement::from_terms(
            m.clone(),
            f,
            vec![(vec![1, 0], Scalar::Q(q(3, 4))), (vec![0, 2], qs(-2))],
            Cutoff::Finite(q(7, 2)),
        )
        .unwrap();
        let s = a.to_text();
        let back = NovikovElement::from_text(m, f, &s).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn prime_field_arithmetic() {
        let f = BaseField::prime(7).unwrap();
        let a = f.from_i64(3);
        let b = f.from_i64(5);
        assert_eq!(a.mul(&b), f.from_i64(1));
        assert_eq!(a.inv().unwrap(), f.from_i64(5));
        assert!(BaseField::prime(6).is_err());
        assert!(is_prime(1_000_000_007));
        assert!(!is_prime(1_000_000_006));
    }

    proptest::proptest! {
        #[test]
        fn ring_axioms_below_cutoff(
            xs in proptest::collection::vec((-4i64..5, -9i64..10), 0..5),
            ys in proptest::collection::vec((-4i64..5, -9i64..10), 0..5),
            zs in proptest::collection::vec((-4i64..5, -9i64..10), 0..5),
        ) {
            let m = GammaMonoid::standard_z();
            let f = BaseField::Rationals;
            let mk = |ts: &[(i64, i64)]| {
                NovikovElement::from_terms(
                    m.clone(),
                    f,
                    ts.iter().map(|(g, c)| (vec![*g], qs(*c))).collect(),
                    Cutoff::Infinite,
                ).unwrap()
            };
            let (a, b, c) = (mk(&xs), mk(&ys), mk(&zs));
            // commutativity, associativity, distributivity (exact elements)
            proptest::prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
            proptest::prop_assert_eq!(
                a.mul(&b).unwrap().mul(&c).unwrap(),
                a.mul(&b.mul(&c).unwrap()).unwrap()
            );
            proptest::prop_assert_eq!(
                a.mul(&b.add(&c).unwrap()).unwrap(),
                a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap()
            );
        }

        #[test]
        fn unipotent_inverse_is_an_inverse(
            tail in proptest::collection::vec((1i64..5, -9i64..10), 0..4),
            unit in 1i64..7,
            e in 1i64..8,
        ) {
            let m = GammaMonoid::standard_z();
            let f = BaseField::Rationals;
            let mut ts: Vec<(GammaElt, Scalar)> = vec![(vec![0], qs(unit))];
            ts.extend(tail.iter().map(|(g, c)| (vec![*g], qs(*c))));
            let a = NovikovElement::from_terms(m.clone(), f, ts, Cutoff::Infinite).unwrap();
            let target = q(e, 1);
            let b = a.invert_unipotent(&target).unwrap();
            let prod = a.mul(&b).unwrap();
            let resid = prod.sub(&NovikovElement::one(m, f)).unwrap();
            proptest::prop_assert!(resid.is_zero_below_cutoff());
            match resid.cutoff() {
                Cutoff::Finite(got) => proptest::prop_assert!(*got >= target),
                Cutoff::Infinite => {}
            }
        }
    }
}
