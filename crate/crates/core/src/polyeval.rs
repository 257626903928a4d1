//! Root polynomials over `Z_n` and their evaluation under encryption.

use std::collections::HashSet;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::paillier::{Ciphertext, PaillierError, PublicKey};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("a root polynomial needs at least one root")]
    NoRoots,
    #[error("duplicate root")]
    DuplicateRoot,
    #[error("root is not an element of Z_n")]
    RootOutOfRange,
    #[error("padding degree {degree} is below the {roots} real roots")]
    DegreeTooSmall { degree: usize, roots: usize },
    #[error("evaluation point is not an element of Z_n")]
    PointOutOfRange,
    #[error("encrypted polynomial has no coefficients")]
    EmptyPolynomial,
    #[error(transparent)]
    Paillier(#[from] PaillierError),
}

/// Monic polynomial `prod (x - a_i) mod n`, coefficients lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootPolynomial {
    coefficients: Vec<BigUint>,
    roots: Vec<BigUint>,
    modulus: BigUint,
}

impl RootPolynomial {
    pub fn coefficients(&self) -> &[BigUint] {
        &self.coefficients
    }

    pub fn roots(&self) -> &[BigUint] {
        &self.roots
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Horner evaluation in the clear.
    pub fn eval_plain(&self, x: &BigUint) -> Result<BigUint, PolyError> {
        if x >= &self.modulus {
            return Err(PolyError::PointOutOfRange);
        }
        let n = &self.modulus;
        Ok(self
            .coefficients
            .iter()
            .rev()
            .fold(BigUint::zero(), |acc, c| (acc * x + c) % n))
    }

    /// `prod (x - r)` over the padded root list, where `pad` repeats until
    /// the degree reaches `degree`. `pad` must differ from every real root.
    pub fn with_padding(
        roots: &[BigUint],
        pad: &BigUint,
        degree: usize,
        n: &BigUint,
    ) -> Result<Self, PolyError> {
        if degree == 0 {
            return Err(PolyError::NoRoots);
        }
        if roots.len() > degree {
            return Err(PolyError::DegreeTooSmall {
                degree,
                roots: roots.len(),
            });
        }
        check_roots(roots, n)?;
        if pad >= n {
            return Err(PolyError::RootOutOfRange);
        }
        if roots.contains(pad) {
            return Err(PolyError::DuplicateRoot);
        }
        let mut all = roots.to_vec();
        all.resize(degree, pad.clone());
        Ok(expand(all, n))
    }
}

fn check_roots(roots: &[BigUint], n: &BigUint) -> Result<(), PolyError> {
    let mut seen = HashSet::with_capacity(roots.len());
    for r in roots {
        if r >= n {
            return Err(PolyError::RootOutOfRange);
        }
        if !seen.insert(r) {
            return Err(PolyError::DuplicateRoot);
        }
    }
    Ok(())
}

/// Schoolbook expansion: multiply in one `(x - a)` factor at a time.
fn expand(roots: Vec<BigUint>, n: &BigUint) -> RootPolynomial {
    let mut coeffs = vec![BigUint::one()];
    for a in &roots {
        let neg_a = (n - a) % n;
        let mut next = vec![BigUint::zero(); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i + 1] = (&next[i + 1] + c) % n;
            next[i] = (&next[i] + c * &neg_a) % n;
        }
        coeffs = next;
    }
    RootPolynomial {
        coefficients: coeffs,
        roots,
        modulus: n.clone(),
    }
}

/// Builds `prod (x - a_i) mod n` from distinct roots.
pub fn build_root_poly(roots: &[BigUint], n: &BigUint) -> Result<RootPolynomial, PolyError> {
    if roots.is_empty() {
        return Err(PolyError::NoRoots);
    }
    check_roots(roots, n)?;
    Ok(expand(roots.to_vec(), n))
}

/// Coefficient-wise encryption of a polynomial, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedPolynomial {
    coefficients: Vec<Ciphertext>,
}

impl EncryptedPolynomial {
    pub fn encrypt<R: RngCore + CryptoRng + ?Sized>(
        poly: &RootPolynomial,
        pk: &PublicKey,
        rng: &mut R,
    ) -> Result<Self, PolyError> {
        let coefficients = poly
            .coefficients()
            .iter()
            .map(|c| pk.encrypt(c, rng))
            .collect::<Result<_, _>>()?;
        Ok(EncryptedPolynomial { coefficients })
    }

    pub fn from_ciphertexts(coefficients: Vec<Ciphertext>) -> Result<Self, PolyError> {
        if coefficients.is_empty() {
            return Err(PolyError::EmptyPolynomial);
        }
        Ok(EncryptedPolynomial { coefficients })
    }

    pub fn coefficients(&self) -> &[Ciphertext] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<Ciphertext> {
        self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }
}

/// `Enc(p(x))` from `Enc(p_0..p_s)` with exactly `s` scalar multiplications.
pub fn eval_encrypted_horner(
    pk: &PublicKey,
    enc_poly: &EncryptedPolynomial,
    x: &BigUint,
) -> Result<Ciphertext, PolyError> {
    if x >= pk.n() {
        return Err(PolyError::PointOutOfRange);
    }
    let mut iter = enc_poly.coefficients.iter().rev();
    let mut acc = iter.next().ok_or(PolyError::EmptyPolynomial)?.clone();
    for c in iter {
        acc = pk.add(&pk.scalar_mul(&acc, x)?, c);
    }
    Ok(acc)
}
