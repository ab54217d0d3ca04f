//! Wide fixed-point scalar for extended-precision replays of the generic core.
//!
//! `Fixed<L>` stores a two's-complement integer of `L` 64-bit limbs scaled by
//! `2^-(64 (L - 1))`: one limb of signed integer part and `L - 1` limbs of
//! fraction. Arithmetic, square roots and the constants of [`FloatConst`] are
//! computed to the full width; transcendental functions are not provided and
//! panic. There is no NaN; infinities saturate to the extreme values.
//!
//! The chaotic two-ball flow amplifies rounding errors by a roughly constant
//! factor per collision, so round trips over long event chains only close at
//! this kind of precision.

use std::cmp::Ordering;
use std::fmt;
use std::num::FpCategory;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};

use num_traits::{Float, FloatConst, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};

use crate::scalar::Real;

const MAX_LIMBS: usize = 32;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fixed<const L: usize> {
    /// Little-endian two's-complement limbs.
    limbs: [u64; L],
}

/// 1024 fraction bits, about 308 significant decimal digits.
pub type Fixed1024 = Fixed<17>;

impl<const L: usize> Fixed<L> {
    const FRAC_BITS: usize = 64 * (L - 1);

    const fn from_limbs(limbs: [u64; L]) -> Self {
        assert!(L >= 2 && L <= MAX_LIMBS);
        Fixed { limbs }
    }

    fn zero_v() -> Self {
        Self::from_limbs([0; L])
    }

    fn one_v() -> Self {
        let mut l = [0; L];
        l[L - 1] = 1;
        Self::from_limbs(l)
    }

    /// Smallest positive value, `2^-FRAC_BITS`.
    fn ulp() -> Self {
        let mut l = [0; L];
        l[0] = 1;
        Self::from_limbs(l)
    }

    /// Positive saturation value; doubles as `+inf`.
    fn max_v() -> Self {
        let mut l = [u64::MAX; L];
        l[L - 1] = i64::MAX as u64;
        Self::from_limbs(l)
    }

    pub fn is_negative(&self) -> bool {
        self.limbs[L - 1] >> 63 == 1
    }

    fn is_zero_v(&self) -> bool {
        self.limbs.iter().all(|&x| x == 0)
    }

    fn wrapping_neg(&self) -> Self {
        let mut out = [0; L];
        let mut carry = 1u64;
        for i in 0..L {
            let (s, c) = (!self.limbs[i]).overflowing_add(carry);
            out[i] = s;
            carry = c as u64;
        }
        Self::from_limbs(out)
    }

    fn magnitude(&self) -> [u64; L] {
        if self.is_negative() {
            self.wrapping_neg().limbs
        } else {
            self.limbs
        }
    }

    fn from_magnitude(mag: [u64; L], negative: bool) -> Self {
        assert!(mag[L - 1] >> 63 == 0, "Fixed overflow");
        let v = Self::from_limbs(mag);
        if negative {
            v.wrapping_neg()
        } else {
            v
        }
    }

    fn add_v(self, o: Self) -> Self {
        let mut out = [0; L];
        let mut carry = false;
        for i in 0..L {
            let (s1, c1) = self.limbs[i].overflowing_add(o.limbs[i]);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            out[i] = s2;
            carry = c1 || c2;
        }
        let r = Self::from_limbs(out);
        assert!(
            !(self.is_negative() == o.is_negative() && r.is_negative() != self.is_negative()),
            "Fixed overflow"
        );
        r
    }

    fn mul_v(self, o: Self) -> Self {
        let neg = self.is_negative() != o.is_negative();
        let (a, b) = (self.magnitude(), o.magnitude());
        let mut p = [0u64; 2 * MAX_LIMBS];
        for i in 0..L {
            if a[i] == 0 {
                continue;
            }
            let mut carry = 0u128;
            for j in 0..L {
                let t = a[i] as u128 * b[j] as u128 + p[i + j] as u128 + carry;
                p[i + j] = t as u64;
                carry = t >> 64;
            }
            p[i + L] = carry as u64;
        }
        // drop L - 1 fraction limbs, rounding to nearest
        let round_up = p[L - 2] >> 63 == 1;
        let mut out = [0; L];
        out.copy_from_slice(&p[L - 1..2 * L - 1]);
        assert!(p[2 * L - 1] == 0, "Fixed overflow");
        if round_up {
            for limb in out.iter_mut() {
                let (s, c) = limb.overflowing_add(1);
                *limb = s;
                if !c {
                    break;
                }
            }
        }
        if out.iter().all(|&x| x == 0) {
            return Self::zero_v();
        }
        Self::from_magnitude(out, neg)
    }

    fn scale_pow2(self, k: i32) -> Self {
        // exact multiplication by 2^k for small |k|
        let f = Self::from_f64_exact(2f64.powi(k)).expect("power of two in range");
        self.mul_v(f)
    }

    fn recip_v(self) -> Self {
        assert!(!self.is_zero_v(), "Fixed division by zero");
        let approx = 1.0 / self.to_f64_v();
        let mut r = Self::from_f64_exact(approx).expect("reciprocal in range");
        let two = Self::one_v().add_v(Self::one_v());
        // Newton doubles the correct bits each step: 53 -> 64 L needs log2(64 L / 53) + 1 steps
        let steps = (64.0 * L as f64 / 50.0).log2().ceil() as usize + 1;
        for _ in 0..steps {
            r = r.mul_v(two.add_v(self.mul_v(r).wrapping_neg()));
        }
        r
    }

    fn div_v(self, o: Self) -> Self {
        let r = o.recip_v();
        let q = self.mul_v(r);
        // one residual correction absorbs the rounding of the reciprocal
        let rem = self.add_v(q.mul_v(o).wrapping_neg());
        q.add_v(rem.mul_v(r))
    }

    fn sqrt_v(self) -> Self {
        if self.is_zero_v() {
            return self;
        }
        assert!(!self.is_negative(), "Fixed square root of a negative number");
        let mut x = Self::from_f64_exact(self.to_f64_v().sqrt()).expect("root in range");
        if x.is_zero_v() {
            x = Self::ulp();
        }
        let steps = (64.0 * L as f64 / 50.0).log2().ceil() as usize + 2;
        for _ in 0..steps {
            x = x.add_v(self.div_v(x)).scale_pow2(-1);
        }
        x
    }

    fn from_f64_exact(x: f64) -> Option<Self> {
        if x.is_nan() {
            return None;
        }
        if x.is_infinite() {
            return Some(if x > 0.0 { Self::max_v() } else { Self::max_v().wrapping_neg() });
        }
        if x == 0.0 {
            return Some(Self::zero_v());
        }
        let (mant, exp, sign) = Float::integer_decode(x);
        // value = mant * 2^exp; stored integer = mant * 2^(exp + FRAC_BITS)
        let shift = exp as i64 + Self::FRAC_BITS as i64;
        let mut mag = [0u64; L];
        if shift >= 0 {
            let shift = shift as usize;
            // the top mantissa bit (index 52) must stay below the sign bit
            if shift + 52 >= 64 * L - 1 {
                return Some(if sign > 0 { Self::max_v() } else { Self::max_v().wrapping_neg() });
            }
            let (limb, bit) = (shift / 64, shift % 64);
            mag[limb] = mant << bit;
            if bit > 0 && limb + 1 < L {
                mag[limb + 1] = mant >> (64 - bit);
            }
        } else {
            let s = (-shift) as u32;
            if s >= 64 {
                return Some(Self::zero_v());
            }
            mag[0] = mant >> s;
        }
        if mag[L - 1] >> 63 == 1 {
            return Some(if sign > 0 { Self::max_v() } else { Self::max_v().wrapping_neg() });
        }
        Some(Self::from_magnitude(mag, sign < 0))
    }

    fn to_f64_v(&self) -> f64 {
        if *self == Self::max_v() {
            return f64::INFINITY;
        }
        if *self == Self::max_v().wrapping_neg() {
            return f64::NEG_INFINITY;
        }
        let mag = self.magnitude();
        let top = match mag.iter().rposition(|&x| x != 0) {
            Some(t) => t,
            None => return 0.0,
        };
        let mut acc = 0.0;
        for i in (top.saturating_sub(2)..=top).rev() {
            acc += mag[i] as f64 * 2f64.powi(64 * i as i32 - Self::FRAC_BITS as i32);
        }
        if self.is_negative() {
            -acc
        } else {
            acc
        }
    }

    fn floor_v(self) -> Self {
        let mut l = self.limbs;
        for x in l.iter_mut().take(L - 1) {
            *x = 0;
        }
        Self::from_limbs(l)
    }

    fn half() -> Self {
        let mut l = [0; L];
        l[L - 2] = 1 << 63;
        Self::from_limbs(l)
    }

    /// Machin: `pi = 16 atan(1/5) - 4 atan(1/239)`.
    fn pi_v() -> Self {
        let atan_inv = |n: i64| {
            let x = Self::one_v().div_v(Self::from_i64_v(n));
            let x2 = x.mul_v(x);
            let mut term = x;
            let mut sum = x;
            let mut k = 1i64;
            loop {
                term = term.mul_v(x2).wrapping_neg();
                let t = term.div_v(Self::from_i64_v(2 * k + 1));
                if t.is_zero_v() {
                    break;
                }
                sum = sum.add_v(t);
                k += 1;
            }
            sum
        };
        let a = atan_inv(5).mul_v(Self::from_i64_v(16));
        let b = atan_inv(239).mul_v(Self::from_i64_v(4));
        a.add_v(b.wrapping_neg())
    }

    /// `2 atanh(1 / n) = ln((n + 1) / (n - 1))`.
    fn ln_ratio(n: i64) -> Self {
        let x = Self::one_v().div_v(Self::from_i64_v(n));
        let x2 = x.mul_v(x);
        let mut term = x;
        let mut sum = x;
        let mut k = 1i64;
        loop {
            term = term.mul_v(x2);
            let t = term.div_v(Self::from_i64_v(2 * k + 1));
            if t.is_zero_v() {
                break;
            }
            sum = sum.add_v(t);
            k += 1;
        }
        sum.add_v(sum)
    }

    fn ln2_v() -> Self {
        Self::ln_ratio(3)
    }

    fn ln10_v() -> Self {
        // ln 10 = 3 ln 2 + ln(5/4), ln(5/4) = 2 atanh(1/9)
        Self::ln2_v().mul_v(Self::from_i64_v(3)).add_v(Self::ln_ratio(9))
    }

    fn e_v() -> Self {
        let mut sum = Self::one_v();
        let mut term = Self::one_v();
        let mut k = 1i64;
        loop {
            term = term.div_v(Self::from_i64_v(k));
            if term.is_zero_v() {
                break;
            }
            sum = sum.add_v(term);
            k += 1;
        }
        sum
    }

    fn from_i64_v(n: i64) -> Self {
        let mut l = [0; L];
        l[L - 1] = n.unsigned_abs();
        Self::from_magnitude(l, n < 0)
    }

    fn unsupported(name: &str) -> ! {
        panic!("Fixed<{L}>: {name} is not available at extended precision")
    }
}

impl<const L: usize> PartialOrd for Fixed<L> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl<const L: usize> Ord for Fixed<L> {
    fn cmp(&self, o: &Self) -> Ordering {
        let (a, b) = (self.limbs[L - 1] as i64, o.limbs[L - 1] as i64);
        if a != b {
            return a.cmp(&b);
        }
        for i in (0..L - 1).rev() {
            if self.limbs[i] != o.limbs[i] {
                return self.limbs[i].cmp(&o.limbs[i]);
            }
        }
        Ordering::Equal
    }
}

impl<const L: usize> Add for Fixed<L> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.add_v(o)
    }
}

impl<const L: usize> Sub for Fixed<L> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.add_v(o.wrapping_neg())
    }
}

impl<const L: usize> Mul for Fixed<L> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.mul_v(o)
    }
}

impl<const L: usize> Div for Fixed<L> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self.div_v(o)
    }
}

impl<const L: usize> Rem for Fixed<L> {
    type Output = Self;
    fn rem(self, o: Self) -> Self {
        self - (self / o).trunc() * o
    }
}

impl<const L: usize> Neg for Fixed<L> {
    type Output = Self;
    fn neg(self) -> Self {
        self.wrapping_neg()
    }
}

impl<const L: usize> Zero for Fixed<L> {
    fn zero() -> Self {
        Self::zero_v()
    }
    fn is_zero(&self) -> bool {
        self.is_zero_v()
    }
}

impl<const L: usize> One for Fixed<L> {
    fn one() -> Self {
        Self::one_v()
    }
}

impl<const L: usize> Num for Fixed<L> {
    type FromStrRadixErr = std::num::ParseFloatError;
    /// Parses through `f64`; the result carries only double precision.
    fn from_str_radix(s: &str, _radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        let x: f64 = s.parse()?;
        Ok(Self::from_f64_exact(x).unwrap_or_else(Self::zero_v))
    }
}

impl<const L: usize> ToPrimitive for Fixed<L> {
    fn to_i64(&self) -> Option<i64> {
        Some(self.trunc().limbs[L - 1] as i64)
    }
    fn to_u64(&self) -> Option<u64> {
        if self.is_negative() {
            None
        } else {
            Some(self.limbs[L - 1])
        }
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.to_f64_v())
    }
}

impl<const L: usize> FromPrimitive for Fixed<L> {
    fn from_i64(n: i64) -> Option<Self> {
        Some(Self::from_i64_v(n))
    }
    fn from_u64(n: u64) -> Option<Self> {
        i64::try_from(n).ok().map(Self::from_i64_v)
    }
    fn from_f64(x: f64) -> Option<Self> {
        Self::from_f64_exact(x)
    }
}

impl<const L: usize> NumCast for Fixed<L> {
    fn from<N: ToPrimitive>(n: N) -> Option<Self> {
        n.to_f64().and_then(Self::from_f64_exact)
    }
}

impl<const L: usize> Default for Fixed<L> {
    fn default() -> Self {
        Self::zero_v()
    }
}

impl<const L: usize> fmt::Debug for Fixed<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fixed<{L}>({:e})", self.to_f64_v())
    }
}

impl<const L: usize> fmt::Display for Fixed<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f64_v(), f)
    }
}

impl<const L: usize> fmt::LowerExp for Fixed<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerExp::fmt(&self.to_f64_v(), f)
    }
}

impl<const L: usize> Float for Fixed<L> {
    fn nan() -> Self {
        Self::unsupported("NaN")
    }
    fn infinity() -> Self {
        Self::max_v()
    }
    fn neg_infinity() -> Self {
        Self::max_v().wrapping_neg()
    }
    fn neg_zero() -> Self {
        Self::zero_v()
    }
    fn min_value() -> Self {
        Self::max_v().wrapping_neg().add_v(Self::ulp())
    }
    fn min_positive_value() -> Self {
        Self::ulp()
    }
    fn epsilon() -> Self {
        Self::ulp()
    }
    fn max_value() -> Self {
        Self::max_v().add_v(Self::ulp().wrapping_neg())
    }
    fn is_nan(self) -> bool {
        false
    }
    fn is_infinite(self) -> bool {
        self == Self::infinity() || self == Self::neg_infinity()
    }
    fn is_finite(self) -> bool {
        !self.is_infinite()
    }
    fn is_normal(self) -> bool {
        self.is_finite() && !self.is_zero_v()
    }
    fn classify(self) -> FpCategory {
        if self.is_zero_v() {
            FpCategory::Zero
        } else if self.is_infinite() {
            FpCategory::Infinite
        } else {
            FpCategory::Normal
        }
    }
    fn floor(self) -> Self {
        self.floor_v()
    }
    fn ceil(self) -> Self {
        -(-self).floor_v()
    }
    fn round(self) -> Self {
        if self.is_negative() {
            -((-self) + Self::half()).floor_v()
        } else {
            (self + Self::half()).floor_v()
        }
    }
    fn trunc(self) -> Self {
        if self.is_negative() {
            self.ceil()
        } else {
            self.floor_v()
        }
    }
    fn fract(self) -> Self {
        self - self.trunc()
    }
    fn abs(self) -> Self {
        if self.is_negative() {
            -self
        } else {
            self
        }
    }
    fn signum(self) -> Self {
        if self.is_negative() {
            -Self::one_v()
        } else {
            Self::one_v()
        }
    }
    fn is_sign_positive(self) -> bool {
        !self.is_negative()
    }
    fn is_sign_negative(self) -> bool {
        self.is_negative()
    }
    /// Not fused: the product is rounded once to the fixed grid, whose spacing
    /// is far below any tolerance in use.
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn recip(self) -> Self {
        self.recip_v()
    }
    fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { self.recip_v() } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Self::one_v();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }
    fn powf(self, _n: Self) -> Self {
        Self::unsupported("powf")
    }
    fn sqrt(self) -> Self {
        self.sqrt_v()
    }
    fn exp(self) -> Self {
        Self::unsupported("exp")
    }
    fn exp2(self) -> Self {
        Self::unsupported("exp2")
    }
    fn ln(self) -> Self {
        Self::unsupported("ln")
    }
    fn log(self, _base: Self) -> Self {
        Self::unsupported("log")
    }
    fn log2(self) -> Self {
        Self::unsupported("log2")
    }
    fn log10(self) -> Self {
        Self::unsupported("log10")
    }
    fn max(self, o: Self) -> Self {
        if self >= o {
            self
        } else {
            o
        }
    }
    fn min(self, o: Self) -> Self {
        if self <= o {
            self
        } else {
            o
        }
    }
    fn abs_sub(self, o: Self) -> Self {
        if self > o {
            self - o
        } else {
            Self::zero_v()
        }
    }
    fn cbrt(self) -> Self {
        Self::unsupported("cbrt")
    }
    fn hypot(self, o: Self) -> Self {
        (self * self + o * o).sqrt_v()
    }
    fn sin(self) -> Self {
        Self::unsupported("sin")
    }
    fn cos(self) -> Self {
        Self::unsupported("cos")
    }
    fn tan(self) -> Self {
        Self::unsupported("tan")
    }
    fn asin(self) -> Self {
        Self::unsupported("asin")
    }
    fn acos(self) -> Self {
        Self::unsupported("acos")
    }
    fn atan(self) -> Self {
        Self::unsupported("atan")
    }
    fn atan2(self, _o: Self) -> Self {
        Self::unsupported("atan2")
    }
    fn sin_cos(self) -> (Self, Self) {
        Self::unsupported("sin_cos")
    }
    fn exp_m1(self) -> Self {
        Self::unsupported("exp_m1")
    }
    fn ln_1p(self) -> Self {
        Self::unsupported("ln_1p")
    }
    fn sinh(self) -> Self {
        Self::unsupported("sinh")
    }
    fn cosh(self) -> Self {
        Self::unsupported("cosh")
    }
    fn tanh(self) -> Self {
        Self::unsupported("tanh")
    }
    fn asinh(self) -> Self {
        Self::unsupported("asinh")
    }
    fn acosh(self) -> Self {
        Self::unsupported("acosh")
    }
    fn atanh(self) -> Self {
        Self::unsupported("atanh")
    }
    /// Decomposition of the nearest `f64`.
    fn integer_decode(self) -> (u64, i16, i8) {
        Float::integer_decode(self.to_f64_v())
    }
}

impl<const L: usize> FloatConst for Fixed<L> {
    fn E() -> Self {
        Self::e_v()
    }
    fn FRAC_1_PI() -> Self {
        Self::pi_v().recip_v()
    }
    fn FRAC_1_SQRT_2() -> Self {
        Self::half().sqrt_v()
    }
    fn FRAC_2_PI() -> Self {
        Self::from_i64_v(2).div_v(Self::pi_v())
    }
    fn FRAC_2_SQRT_PI() -> Self {
        Self::from_i64_v(2).div_v(Self::pi_v().sqrt_v())
    }
    fn FRAC_PI_2() -> Self {
        Self::pi_v().scale_pow2(-1)
    }
    fn FRAC_PI_3() -> Self {
        Self::pi_v().div_v(Self::from_i64_v(3))
    }
    fn FRAC_PI_4() -> Self {
        Self::pi_v().scale_pow2(-2)
    }
    fn FRAC_PI_6() -> Self {
        Self::pi_v().div_v(Self::from_i64_v(6))
    }
    fn FRAC_PI_8() -> Self {
        Self::pi_v().scale_pow2(-3)
    }
    fn LN_10() -> Self {
        Self::ln10_v()
    }
    fn LN_2() -> Self {
        Self::ln2_v()
    }
    fn LOG10_E() -> Self {
        Self::ln10_v().recip_v()
    }
    fn LOG2_E() -> Self {
        Self::ln2_v().recip_v()
    }
    fn PI() -> Self {
        Self::pi_v()
    }
    fn SQRT_2() -> Self {
        Self::from_i64_v(2).sqrt_v()
    }
}

impl<const L: usize> Real for Fixed<L> {
    fn event_tie_tol() -> Self {
        Self::from_f64_exact(1e-12).unwrap()
    }
    fn contact_tol() -> Self {
        Self::from_f64_exact(1e-10).unwrap()
    }
    fn constraint_tol() -> Self {
        Self::from_f64_exact(1e-12).unwrap()
    }
}
