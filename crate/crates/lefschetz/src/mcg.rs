//! Integer symplectic transvections and monodromy words.
//!
//! Homology classes of curves on a closed genus-`g` surface live in `Z^{2g}`
//! with the standard symplectic form `<x, y> = x^T J y`,
//! `J = [[0, I], [-I, 0]]`. A Dehn twist along a curve with class `c` acts as
//! the transvection `T_c(x) = x + eps <x, c> c`, with `eps = +1` for the
//! right-handed (chiral) twist and `-1` for its left-handed (achiral)
//! mirror. Separating curves are null-homologous, so their transvections are
//! the identity; they carry their genus split `(h, g - h)` instead.
//!
//! Words multiply left to right: the prefix products of `t_1 ... t_n` are
//! `P_j = M_1 M_2 ... M_j`. Hurwitz moves swap adjacent letters while
//! conjugating one past the other; conjugates of transvections are
//! transvections along the image class, so letters keep explicit curves
//! whenever one is tracked, and fall back to carrying a bare matrix
//! otherwise.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::exact::IntMat;

/// Errors from curve construction, word edits and the word file format.
#[derive(Debug, Error)]
pub enum WordError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("nonseparating class must be nonzero")]
    ZeroClass,
    #[error("nonseparating class must be primitive (entry gcd 1), got gcd {gcd}")]
    NotPrimitive { gcd: BigInt },
    #[error("class has {got} entries, expected {expected} for genus {genus}")]
    ClassLength { got: usize, expected: usize, genus: usize },
    #[error("separating split h = {h} must satisfy 1 <= h <= {max} for genus {genus}")]
    BadSplit { h: usize, genus: usize, max: usize },
    #[error("letter index {j} out of range for word of length {len}")]
    IndexOutOfRange { j: usize, len: usize },
    #[error("words have different genus: {a} vs {b}")]
    GenusMismatch { a: usize, b: usize },
    #[error("letter carries only a matrix and cannot be written in the word format")]
    UnserializableLetter,
    #[error("conjugator is not symplectic for genus {genus}")]
    NotSymplectic { genus: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The standard symplectic `Z^{2g}` with `J = [[0, I], [-I, 0]]` in the basis
/// `a_1..a_g, b_1..b_g` (so `<a_i, b_i> = +1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymplecticSpace {
    genus: usize,
}

impl SymplecticSpace {
    pub fn new(genus: usize) -> Self {
        assert!(genus >= 1, "genus must be positive");
        SymplecticSpace { genus }
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    /// Dimension `2g` of the homology lattice.
    pub fn dim(&self) -> usize {
        2 * self.genus
    }

    pub fn j_matrix(&self) -> IntMat {
        let g = self.genus;
        let mut j = IntMat::zeros(2 * g, 2 * g);
        for i in 0..g {
            j[(i, g + i)] = BigInt::one();
            j[(g + i, i)] = -BigInt::one();
        }
        j
    }

    /// `<x, y> = x^T J y`.
    pub fn pairing(&self, x: &[BigInt], y: &[BigInt]) -> BigInt {
        let g = self.genus;
        assert_eq!(x.len(), 2 * g);
        assert_eq!(y.len(), 2 * g);
        let mut acc = BigInt::zero();
        for i in 0..g {
            acc += &x[i] * &y[g + i];
            acc -= &x[g + i] * &y[i];
        }
        acc
    }

    /// Exact check of `M^T J M = J`.
    pub fn is_symplectic(&self, m: &IntMat) -> bool {
        if m.rows() != self.dim() || m.cols() != self.dim() {
            return false;
        }
        let j = self.j_matrix();
        m.transpose().mul(&j).mul(m) == j
    }

    /// Inverse of a symplectic matrix without elimination: `M^-1 = -J M^T J`.
    pub fn symplectic_inverse(&self, m: &IntMat) -> IntMat {
        let j = self.j_matrix();
        j.mul(&m.transpose()).mul(&j).neg()
    }
}

/// Handedness of a Dehn twist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chirality {
    /// Right-handed (chiral), `eps = +1`.
    Right,
    /// Left-handed (achiral), `eps = -1`.
    Left,
}

impl Chirality {
    pub fn sign(&self) -> i64 {
        match self {
            Chirality::Right => 1,
            Chirality::Left => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Chirality::Right => Chirality::Left,
            Chirality::Left => Chirality::Right,
        }
    }
}

/// Homology data of a simple closed curve.
///
/// Invariant: the class is zero exactly when the curve is separating, and a
/// nonseparating class is primitive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Curve {
    homology: Vec<BigInt>,
    separating: Option<(usize, usize)>,
}

impl Curve {
    /// Nonseparating curve with the given primitive class.
    pub fn nonseparating(space: &SymplecticSpace, class: Vec<BigInt>) -> Result<Self, WordError> {
        if class.len() != space.dim() {
            return Err(WordError::ClassLength {
                got: class.len(),
                expected: space.dim(),
                genus: space.genus(),
            });
        }
        if class.iter().all(|v| v.is_zero()) {
            return Err(WordError::ZeroClass);
        }
        let gcd = class
            .iter()
            .fold(BigInt::zero(), |acc, v| acc.gcd(&v.abs()));
        if !gcd.is_one() {
            return Err(WordError::NotPrimitive { gcd });
        }
        Ok(Curve {
            homology: class,
            separating: None,
        })
    }

    /// Convenience constructor from small integers.
    pub fn nonseparating_i64(space: &SymplecticSpace, class: &[i64]) -> Result<Self, WordError> {
        Curve::nonseparating(space, class.iter().map(|&v| BigInt::from(v)).collect())
    }

    /// Separating curve splitting the surface into genus `h` and `g - h`.
    pub fn separating(space: &SymplecticSpace, h: usize) -> Result<Self, WordError> {
        let g = space.genus();
        if h == 0 || h >= g {
            return Err(WordError::BadSplit { h, genus: g, max: g.saturating_sub(1) });
        }
        Ok(Curve {
            homology: vec![BigInt::zero(); space.dim()],
            separating: Some((h, g - h)),
        })
    }

    pub fn homology(&self) -> &[BigInt] {
        &self.homology
    }

    pub fn is_separating(&self) -> bool {
        self.separating.is_some()
    }

    pub fn separating_split(&self) -> Option<(usize, usize)> {
        self.separating
    }

    fn transformed(&self, p: &IntMat) -> Curve {
        Curve {
            homology: p.mul_vec(&self.homology),
            separating: self.separating,
        }
    }
}

/// One letter of a monodromy word: a twist along a tracked curve, or a
/// conjugated letter carrying its symplectic matrix directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Letter {
    Twist { curve: Curve, chirality: Chirality },
    General {
        matrix: IntMat,
        chirality: Chirality,
        separating: Option<(usize, usize)>,
    },
}

impl Letter {
    pub fn chirality(&self) -> Chirality {
        match self {
            Letter::Twist { chirality, .. } | Letter::General { chirality, .. } => *chirality,
        }
    }

    pub fn is_separating(&self) -> bool {
        match self {
            Letter::Twist { curve, .. } => curve.is_separating(),
            Letter::General { separating, .. } => separating.is_some(),
        }
    }

    pub fn separating_split(&self) -> Option<(usize, usize)> {
        match self {
            Letter::Twist { curve, .. } => curve.separating_split(),
            Letter::General { separating, .. } => *separating,
        }
    }

    /// Symplectic matrix of the letter.
    pub fn matrix(&self, space: &SymplecticSpace) -> IntMat {
        match self {
            Letter::Twist { curve, chirality } => twist_matrix(space, curve, *chirality),
            Letter::General { matrix, .. } => matrix.clone(),
        }
    }

    /// Conjugates the letter by a symplectic `p` (with inverse `p_inv`):
    /// `T` becomes `p T p^-1`. Transvections map to transvections along the
    /// image class, so tracked curves stay tracked.
    fn conjugated(&self, p: &IntMat, p_inv: &IntMat, space: &SymplecticSpace) -> Letter {
        match self {
            Letter::Twist { curve, chirality } => Letter::Twist {
                curve: curve.transformed(p),
                chirality: *chirality,
            },
            Letter::General {
                matrix,
                chirality,
                separating,
            } => Letter::General {
                matrix: p.mul(matrix).mul(p_inv),
                chirality: *chirality,
                separating: *separating,
            },
        }
        .tap_check(space)
    }

    /// Mirror of the letter: the inverse twist (flipped chirality; a bare
    /// matrix is inverted).
    fn mirrored(&self, space: &SymplecticSpace) -> Letter {
        match self {
            Letter::Twist { curve, chirality } => Letter::Twist {
                curve: curve.clone(),
                chirality: chirality.flipped(),
            },
            Letter::General {
                matrix,
                chirality,
                separating,
            } => Letter::General {
                matrix: space.symplectic_inverse(matrix),
                chirality: chirality.flipped(),
                separating: *separating,
            },
        }
    }

    fn tap_check(self, space: &SymplecticSpace) -> Letter {
        debug_assert!(space.is_symplectic(&self.matrix(space)));
        self
    }
}

/// Transvection matrix `I + eps c (c^T J^T) = I - eps c c^T J`.
///
/// For a separating (null-homologous) curve this is the identity.
pub fn twist_matrix(space: &SymplecticSpace, curve: &Curve, chirality: Chirality) -> IntMat {
    let n = space.dim();
    let j = space.j_matrix();
    let c = curve.homology();
    let mut m = IntMat::identity(n);
    // (c c^T J)_{ik} = c_i * (c^T J)_k
    let ctj: Vec<BigInt> = (0..n)
        .map(|k| (0..n).map(|r| &c[r] * &j[(r, k)]).sum())
        .collect();
    let eps = BigInt::from(chirality.sign());
    for i in 0..n {
        for k in 0..n {
            let delta = &eps * &c[i] * &ctj[k];
            m[(i, k)] -= delta;
        }
    }
    m
}

/// An ordered product of twist letters over a fixed genus, read left to
/// right as a factorization of the total monodromy over the sphere base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonodromyWord {
    space: SymplecticSpace,
    letters: Vec<Letter>,
}

/// Per-letter matrices and prefix products of a word.
#[derive(Debug, Clone)]
pub struct WordMatrices {
    /// `M_1 .. M_n`.
    pub letters: Vec<IntMat>,
    /// `P_0 = I, P_1 = M_1, ..., P_n = M_1 ... M_n`.
    pub prefixes: Vec<IntMat>,
}

/// Direction of a Hurwitz move at position `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HurwitzDirection {
    /// `(t_j, t_{j+1}) -> (t_j t_{j+1} t_j^-1, t_j)`.
    Right,
    /// `(t_j, t_{j+1}) -> (t_{j+1}, t_{j+1}^-1 t_j t_{j+1})`.
    Left,
}

impl MonodromyWord {
    pub fn new(space: SymplecticSpace, letters: Vec<Letter>) -> Self {
        MonodromyWord { space, letters }
    }

    pub fn empty(space: SymplecticSpace) -> Self {
        MonodromyWord {
            space,
            letters: Vec::new(),
        }
    }

    pub fn space(&self) -> &SymplecticSpace {
        &self.space
    }

    pub fn genus(&self) -> usize {
        self.space.genus()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Per-letter matrices and all prefix products.
    pub fn matrices(&self) -> WordMatrices {
        let letters: Vec<IntMat> = self.letters.iter().map(|l| l.matrix(&self.space)).collect();
        let mut prefixes = Vec::with_capacity(letters.len() + 1);
        prefixes.push(IntMat::identity(self.space.dim()));
        for m in &letters {
            let last = prefixes.last().unwrap();
            prefixes.push(last.mul(m));
        }
        WordMatrices { letters, prefixes }
    }

    /// True when the total product `P_n` is exactly the identity.
    pub fn is_identity_factorization(&self) -> bool {
        self.matrices().prefixes.last().unwrap().is_identity()
    }

    /// Hurwitz move at `j` (0-based, `j + 1 < len`). The total product is
    /// unchanged; one letter is conjugated past its neighbor.
    pub fn hurwitz_move(&self, j: usize, dir: HurwitzDirection) -> Result<MonodromyWord, WordError> {
        if j + 1 >= self.letters.len() {
            return Err(WordError::IndexOutOfRange {
                j,
                len: self.letters.len(),
            });
        }
        let mut letters = self.letters.clone();
        match dir {
            HurwitzDirection::Right => {
                let p = letters[j].matrix(&self.space);
                let p_inv = self.space.symplectic_inverse(&p);
                let conj = letters[j + 1].conjugated(&p, &p_inv, &self.space);
                letters[j + 1] = letters[j].clone();
                letters[j] = conj;
            }
            HurwitzDirection::Left => {
                let m = letters[j + 1].matrix(&self.space);
                let m_inv = self.space.symplectic_inverse(&m);
                let conj = letters[j].conjugated(&m_inv, &m, &self.space);
                letters[j] = letters[j + 1].clone();
                letters[j + 1] = conj;
            }
        }
        Ok(MonodromyWord {
            space: self.space,
            letters,
        })
    }

    /// Mirror word: letters reversed with every chirality flipped. The
    /// mirror of an identity factorization is again one (the product
    /// telescopes against the original).
    pub fn mirror(&self) -> MonodromyWord {
        MonodromyWord {
            space: self.space,
            letters: self
                .letters
                .iter()
                .rev()
                .map(|l| l.mirrored(&self.space))
                .collect(),
        }
    }

    /// Global conjugation: every letter `T` becomes `p T p^-1`. Prefix
    /// products conjugate along, so identity factorizations stay identity
    /// factorizations and the word length is unchanged.
    pub fn conjugate(&self, p: &IntMat) -> Result<MonodromyWord, WordError> {
        if !self.space.is_symplectic(p) {
            return Err(WordError::NotSymplectic { genus: self.genus() });
        }
        let p_inv = self.space.symplectic_inverse(p);
        Ok(MonodromyWord {
            space: self.space,
            letters: self
                .letters
                .iter()
                .map(|l| l.conjugated(p, &p_inv, &self.space))
                .collect(),
        })
    }

    /// Concatenation (same genus required).
    pub fn concat(&self, other: &MonodromyWord) -> Result<MonodromyWord, WordError> {
        if self.genus() != other.genus() {
            return Err(WordError::GenusMismatch {
                a: self.genus(),
                b: other.genus(),
            });
        }
        let mut letters = self.letters.clone();
        letters.extend(other.letters.iter().cloned());
        Ok(MonodromyWord {
            space: self.space,
            letters,
        })
    }

    /// Stable canonical encoding used for hashing and digests.
    pub fn canonical_encoding(&self) -> String {
        let mut out = format!("g={};", self.genus());
        for letter in &self.letters {
            match letter {
                Letter::Twist { curve, chirality } => {
                    if let Some((h, _)) = curve.separating_split() {
                        out.push_str(&format!("t,{},sep,{};", chirality.sign(), h));
                    } else {
                        let coeffs: Vec<String> =
                            curve.homology().iter().map(|v| v.to_string()).collect();
                        out.push_str(&format!("t,{},c,{};", chirality.sign(), coeffs.join(",")));
                    }
                }
                Letter::General {
                    matrix,
                    chirality,
                    separating,
                } => {
                    let mut entries = Vec::new();
                    for i in 0..matrix.rows() {
                        for j in 0..matrix.cols() {
                            entries.push(matrix[(i, j)].to_string());
                        }
                    }
                    let sep = match separating {
                        Some((h, _)) => format!("sep{h}"),
                        None => "ns".to_string(),
                    };
                    out.push_str(&format!(
                        "m,{},{},{};",
                        chirality.sign(),
                        sep,
                        entries.join(",")
                    ));
                }
            }
        }
        out
    }
}

/// The genus-1 chain word `(t_a t_b)^6`, the standard 12-letter identity
/// factorization with total space the rational elliptic surface; its `n`-fold
/// concatenation has `12 n` letters.
pub fn elliptic_word(n: usize) -> MonodromyWord {
    let space = SymplecticSpace::new(1);
    let a = Curve::nonseparating_i64(&space, &[1, 0]).unwrap();
    let b = Curve::nonseparating_i64(&space, &[0, 1]).unwrap();
    let mut letters = Vec::with_capacity(12 * n);
    for _ in 0..(6 * n) {
        letters.push(Letter::Twist {
            curve: a.clone(),
            chirality: Chirality::Right,
        });
        letters.push(Letter::Twist {
            curve: b.clone(),
            chirality: Chirality::Right,
        });
    }
    MonodromyWord::new(space, letters)
}

// --- word file format ------------------------------------------------------
//
//   word g=<g> base=sphere
//   twist <+1|-1> c <2g integers>
//   twist <+1|-1> sep <h>

/// Parses the word format; see the module docs.
pub fn parse_word(text: &str) -> Result<MonodromyWord, WordError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_no, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file, expected `word g=<g> base=sphere` header"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("word") {
        return Err(parse_err(header_no, "expected `word g=<g> base=sphere` header"));
    }
    let mut genus: Option<usize> = None;
    let mut base_ok = false;
    for tok in parts {
        if let Some(g) = tok.strip_prefix("g=") {
            genus = Some(g.parse().map_err(|_| {
                parse_err(header_no, &format!("cannot parse genus from `{g}`"))
            })?);
        } else if let Some(b) = tok.strip_prefix("base=") {
            if b != "sphere" {
                return Err(parse_err(
                    header_no,
                    &format!("unsupported base `{b}` (only sphere)"),
                ));
            }
            base_ok = true;
        } else {
            return Err(parse_err(header_no, &format!("unknown header token `{tok}`")));
        }
    }
    let genus = genus.ok_or_else(|| parse_err(header_no, "header missing g=<g>"))?;
    if genus == 0 {
        return Err(parse_err(header_no, "genus must be positive"));
    }
    if !base_ok {
        return Err(parse_err(header_no, "header missing base=sphere"));
    }

    let space = SymplecticSpace::new(genus);
    let mut letters = Vec::new();
    for (no, line) in lines {
        let mut parts = line.split_whitespace();
        if parts.next() != Some("twist") {
            return Err(parse_err(no, "expected `twist` record"));
        }
        let eps = match parts.next() {
            Some("+1") | Some("1") => Chirality::Right,
            Some("-1") => Chirality::Left,
            Some(tok) => {
                return Err(parse_err(no, &format!("bad chirality `{tok}`, expected +1 or -1")))
            }
            None => return Err(parse_err(no, "missing chirality")),
        };
        match parts.next() {
            Some("c") => {
                let mut class = Vec::with_capacity(space.dim());
                for tok in parts {
                    class.push(tok.parse::<BigInt>().map_err(|_| {
                        parse_err(no, &format!("cannot parse class entry `{tok}`"))
                    })?);
                }
                if class.len() != space.dim() {
                    return Err(parse_err(
                        no,
                        &format!("class has {} entries, expected {}", class.len(), space.dim()),
                    ));
                }
                let curve = Curve::nonseparating(&space, class)
                    .map_err(|e| parse_err(no, &e.to_string()))?;
                letters.push(Letter::Twist { curve, chirality: eps });
            }
            Some("sep") => {
                let h: usize = match parts.next() {
                    Some(tok) => tok
                        .parse()
                        .map_err(|_| parse_err(no, &format!("cannot parse split `{tok}`")))?,
                    None => return Err(parse_err(no, "missing separating split")),
                };
                if parts.next().is_some() {
                    return Err(parse_err(no, "trailing tokens after separating split"));
                }
                let curve =
                    Curve::separating(&space, h).map_err(|e| parse_err(no, &e.to_string()))?;
                letters.push(Letter::Twist { curve, chirality: eps });
            }
            Some(tok) => return Err(parse_err(no, &format!("unknown curve kind `{tok}`"))),
            None => return Err(parse_err(no, "missing curve kind (`c` or `sep`)")),
        }
    }
    Ok(MonodromyWord::new(space, letters))
}

/// Reads a word file.
pub fn read_word<P: AsRef<std::path::Path>>(path: P) -> Result<MonodromyWord, WordError> {
    let text = std::fs::read_to_string(path)?;
    parse_word(&text)
}

/// Formats a word of tracked-curve letters; generalized letters carrying only
/// a matrix are not representable in the format.
pub fn format_word(word: &MonodromyWord) -> Result<String, WordError> {
    let mut out = format!("word g={} base=sphere\n", word.genus());
    for letter in word.letters() {
        match letter {
            Letter::Twist { curve, chirality } => {
                let sign = if chirality.sign() > 0 { "+1" } else { "-1" };
                if let Some((h, _)) = curve.separating_split() {
                    out.push_str(&format!("twist {sign} sep {h}\n"));
                } else {
                    let coeffs: Vec<String> =
                        curve.homology().iter().map(|v| v.to_string()).collect();
                    out.push_str(&format!("twist {sign} c {}\n", coeffs.join(" ")));
                }
            }
            Letter::General { .. } => return Err(WordError::UnserializableLetter),
        }
    }
    Ok(out)
}

/// Writes a word file.
pub fn write_word<P: AsRef<std::path::Path>>(
    word: &MonodromyWord,
    path: P,
) -> Result<(), WordError> {
    std::fs::write(path, format_word(word)?)?;
    Ok(())
}

fn parse_err(line: usize, msg: &str) -> WordError {
    WordError::Parse {
        line,
        msg: msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn right(space: &SymplecticSpace, class: &[i64]) -> Letter {
        Letter::Twist {
            curve: Curve::nonseparating_i64(space, class).unwrap(),
            chirality: Chirality::Right,
        }
    }

    fn left(space: &SymplecticSpace, class: &[i64]) -> Letter {
        Letter::Twist {
            curve: Curve::nonseparating_i64(space, class).unwrap(),
            chirality: Chirality::Left,
        }
    }

    #[test]
    fn genus_one_twists_are_the_standard_transvections() {
        let space = SymplecticSpace::new(1);
        let ta = right(&space, &[1, 0]).matrix(&space);
        assert_eq!(ta, IntMat::from_rows(&[&[1, -1], &[0, 1]]));
        let tb = right(&space, &[0, 1]).matrix(&space);
        assert_eq!(tb, IntMat::from_rows(&[&[1, 0], &[1, 1]]));
        // The left twist is the inverse.
        let ta_inv = left(&space, &[1, 0]).matrix(&space);
        assert!(ta.mul(&ta_inv).is_identity());
    }

    #[test]
    fn elliptic_relation_checked_by_independent_arithmetic() {
        // Plain i64 2x2 arithmetic, no shared code with IntMat.
        type M2 = [[i64; 2]; 2];
        fn mul(a: M2, b: M2) -> M2 {
            let mut out = [[0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
                }
            }
            out
        }
        let ta: M2 = [[1, -1], [0, 1]];
        let tb: M2 = [[1, 0], [1, 1]];
        let mut p: M2 = [[1, 0], [0, 1]];
        for _ in 0..6 {
            p = mul(mul(p, ta), tb);
        }
        assert_eq!(p, [[1, 0], [0, 1]]);

        let word = elliptic_word(1);
        assert_eq!(word.len(), 12);
        assert!(word.is_identity_factorization());
        assert_eq!(elliptic_word(2).len(), 24);
        assert!(elliptic_word(2).is_identity_factorization());
    }

    #[test]
    fn five_curve_chain_relation_holds_at_genus_two() {
        let space = SymplecticSpace::new(2);
        let chain = [
            [1, 0, 0, 0],
            [0, 0, 1, 0],
            [1, 1, 0, 0],
            [0, 0, 0, 1],
            [0, 1, 0, 0],
        ];
        // Consecutive chain curves meet once, all other pairs are disjoint.
        for (i, a) in chain.iter().enumerate() {
            for (j, b) in chain.iter().enumerate().skip(i + 1) {
                let x: Vec<BigInt> = a.iter().map(|&v| BigInt::from(v)).collect();
                let y: Vec<BigInt> = b.iter().map(|&v| BigInt::from(v)).collect();
                let pairing = space.pairing(&x, &y);
                if j == i + 1 {
                    assert_eq!(pairing.magnitude().to_string(), "1");
                } else {
                    assert!(pairing.is_zero());
                }
            }
        }
        let mut letters = Vec::new();
        for _ in 0..6 {
            for class in &chain {
                letters.push(right(&space, class));
            }
        }
        let word = MonodromyWord::new(space, letters);
        assert!(word.is_identity_factorization());
        // Lower powers are not yet trivial.
        let third = MonodromyWord::new(space, word.letters()[..15].to_vec());
        assert!(!third.is_identity_factorization());
    }

    #[test]
    fn two_chain_relation_with_the_separating_boundary() {
        let space = SymplecticSpace::new(2);
        let mut letters = Vec::new();
        for _ in 0..6 {
            letters.push(right(&space, &[1, 0, 0, 0]));
            letters.push(right(&space, &[0, 0, 1, 0]));
        }
        letters.push(Letter::Twist {
            curve: Curve::separating(&space, 1).unwrap(),
            chirality: Chirality::Left,
        });
        let word = MonodromyWord::new(space, letters);
        assert!(word.is_identity_factorization());
        assert!(word.letters()[12].is_separating());
        assert_eq!(word.letters()[12].separating_split(), Some((1, 1)));
        // Null-homologous curves act trivially on homology.
        assert!(word.letters()[12].matrix(word.space()).is_identity());
    }

    #[test]
    fn curve_constructors_enforce_their_invariants() {
        let space = SymplecticSpace::new(2);
        assert!(matches!(
            Curve::nonseparating_i64(&space, &[2, 4, 0, 0]).unwrap_err(),
            WordError::NotPrimitive { .. }
        ));
        assert!(matches!(
            Curve::nonseparating_i64(&space, &[0, 0, 0, 0]).unwrap_err(),
            WordError::ZeroClass
        ));
        assert!(matches!(
            Curve::nonseparating_i64(&space, &[1, 0]).unwrap_err(),
            WordError::ClassLength { got: 2, expected: 4, .. }
        ));
        assert!(matches!(
            Curve::separating(&space, 0).unwrap_err(),
            WordError::BadSplit { .. }
        ));
        assert!(matches!(
            Curve::separating(&space, 2).unwrap_err(),
            WordError::BadSplit { .. }
        ));
        let sep = Curve::separating(&space, 1).unwrap();
        assert!(sep.homology().iter().all(|v| v.is_zero()));
        assert_eq!(sep.separating_split(), Some((1, 1)));
    }

    #[test]
    fn hurwitz_moves_preserve_the_product_and_compose_to_identity() {
        let word = elliptic_word(1);
        let total = word.matrices().prefixes.last().unwrap().clone();
        for j in 0..word.len() - 1 {
            for dir in [HurwitzDirection::Right, HurwitzDirection::Left] {
                let moved = word.hurwitz_move(j, dir).unwrap();
                assert_eq!(moved.len(), word.len());
                assert_eq!(moved.matrices().prefixes.last().unwrap(), &total);
            }
            let round_trip = word
                .hurwitz_move(j, HurwitzDirection::Right)
                .unwrap()
                .hurwitz_move(j, HurwitzDirection::Left)
                .unwrap();
            assert_eq!(&round_trip, &word);
        }
        assert!(matches!(
            word.hurwitz_move(11, HurwitzDirection::Right).unwrap_err(),
            WordError::IndexOutOfRange { j: 11, len: 12 }
        ));
    }

    #[test]
    fn mirror_is_an_involution_preserving_identity_products() {
        let word = elliptic_word(1);
        let mirror = word.mirror();
        assert!(mirror.is_identity_factorization());
        assert_eq!(mirror.mirror(), word);
        assert!(mirror.letters().iter().all(|l| l.chirality() == Chirality::Left));
        // Adjacent letter matrices telescope: M'_k = M_{n+1-k}^{-1}.
        let (fwd, bwd) = (word.matrices(), mirror.matrices());
        for (k, m) in bwd.letters.iter().enumerate() {
            let orig = &fwd.letters[word.len() - 1 - k];
            assert!(m.mul(orig).is_identity());
        }
    }

    #[test]
    fn conjugation_moves_every_letter_and_keeps_the_product_trivial() {
        let space = SymplecticSpace::new(1);
        let p = right(&space, &[1, 1]).matrix(&space);
        let word = elliptic_word(1);
        let conj = word.conjugate(&p).unwrap();
        assert!(conj.is_identity_factorization());
        assert_eq!(conj.len(), word.len());
        let p_inv = space.symplectic_inverse(&p);
        for (orig, moved) in word.letters().iter().zip(conj.letters()) {
            let expect = p.mul(&orig.matrix(&space)).mul(&p_inv);
            assert_eq!(moved.matrix(&space), expect);
        }

        let bogus = IntMat::from_rows(&[&[1, 1], &[1, 1]]);
        assert!(matches!(
            word.conjugate(&bogus).unwrap_err(),
            WordError::NotSymplectic { genus: 1 }
        ));
    }

    #[test]
    fn canonical_encoding_is_a_frozen_format() {
        let space = SymplecticSpace::new(2);
        let word = MonodromyWord::new(
            space,
            vec![
                right(&space, &[1, 0, 0, 0]),
                left(&space, &[0, 1, -1, 0]),
                Letter::Twist {
                    curve: Curve::separating(&space, 1).unwrap(),
                    chirality: Chirality::Left,
                },
            ],
        );
        assert_eq!(
            word.canonical_encoding(),
            "g=2;t,1,c,1,0,0,0;t,-1,c,0,1,-1,0;t,-1,sep,1;"
        );
    }

    #[test]
    fn word_files_round_trip() {
        let space = SymplecticSpace::new(2);
        let word = MonodromyWord::new(
            space,
            vec![
                right(&space, &[1, 0, 0, 0]),
                left(&space, &[0, 1, 0, -3]),
                Letter::Twist {
                    curve: Curve::separating(&space, 1).unwrap(),
                    chirality: Chirality::Right,
                },
            ],
        );
        let text = format_word(&word).unwrap();
        assert_eq!(
            text,
            "word g=2 base=sphere\ntwist +1 c 1 0 0 0\ntwist -1 c 0 1 0 -3\ntwist +1 sep 1\n"
        );
        assert_eq!(parse_word(&text).unwrap(), word);

        let general = MonodromyWord::new(
            SymplecticSpace::new(1),
            vec![Letter::General {
                matrix: IntMat::identity(2),
                chirality: Chirality::Right,
                separating: None,
            }],
        );
        assert!(matches!(
            format_word(&general).unwrap_err(),
            WordError::UnserializableLetter
        ));
    }

    fn parse_line_of(text: &str) -> usize {
        match parse_word(text).unwrap_err() {
            WordError::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn word_parse_errors_carry_line_numbers() {
        assert_eq!(parse_line_of(""), 1);
        assert_eq!(parse_line_of("monodromy g=1 base=sphere"), 1);
        assert_eq!(parse_line_of("word base=sphere"), 1);
        assert_eq!(parse_line_of("word g=1"), 1);
        assert_eq!(parse_line_of("word g=0 base=sphere"), 1);
        assert_eq!(parse_line_of("word g=1 base=disk"), 1);
        let head = "word g=1 base=sphere\n";
        assert_eq!(parse_line_of(&format!("{head}twirl +1 c 1 0")), 2);
        assert_eq!(parse_line_of(&format!("{head}twist 2 c 1 0")), 2);
        assert_eq!(parse_line_of(&format!("{head}twist +1 c 1")), 2);
        assert_eq!(parse_line_of(&format!("{head}twist +1 c 2 4")), 2);
        assert_eq!(parse_line_of(&format!("{head}twist +1 sep")), 2);
        assert_eq!(parse_line_of(&format!("{head}twist +1 ring 1")), 2);
        assert_eq!(parse_line_of(&format!("{head}\n\ntwist +1 c 1 0\ntwist -1 q")), 5);
    }

    #[test]
    fn empty_words_are_identity_factorizations() {
        let word = MonodromyWord::empty(SymplecticSpace::new(3));
        assert!(word.is_empty());
        assert!(word.is_identity_factorization());
        assert_eq!(word.matrices().prefixes.len(), 1);
    }

    /// Random primitive class in `Z^{2g}` with small entries.
    fn class_strategy(genus: usize) -> impl Strategy<Value = Vec<i64>> {
        proptest::collection::vec(-3_i64..=3, 2 * genus).prop_filter_map(
            "class must be primitive",
            |v| {
                let g = v.iter().fold(0_i64, |acc, &x| num_integer::gcd(acc, x));
                (g == 1).then_some(v)
            },
        )
    }

    proptest! {
        #[test]
        fn twists_are_symplectic_and_invert_exactly(
            classes in proptest::collection::vec(class_strategy(2), 1..5),
            flips in proptest::collection::vec(any::<bool>(), 4),
        ) {
            let space = SymplecticSpace::new(2);
            let mut product = IntMat::identity(4);
            for (k, class) in classes.iter().enumerate() {
                let letter = if flips[k % flips.len()] {
                    left(&space, class)
                } else {
                    right(&space, class)
                };
                product = product.mul(&letter.matrix(&space));
            }
            prop_assert!(space.is_symplectic(&product));
            let inv = space.symplectic_inverse(&product);
            prop_assert!(product.mul(&inv).is_identity());
            prop_assert!(inv.mul(&product).is_identity());
        }

        #[test]
        fn hurwitz_moves_never_change_the_total_product(
            moves in proptest::collection::vec((0_usize..11, any::<bool>()), 1..40),
        ) {
            let mut word = elliptic_word(1);
            let total = word.matrices().prefixes.last().unwrap().clone();
            for (j, dir) in moves {
                let dir = if dir { HurwitzDirection::Right } else { HurwitzDirection::Left };
                word = word.hurwitz_move(j, dir).unwrap();
                prop_assert!(word.letters().iter().all(|l| !l.is_separating()));
            }
            let final_product = word.matrices().prefixes.last().unwrap().clone();
            prop_assert_eq!(final_product, total);
            prop_assert!(word.is_identity_factorization());
        }
    }
}
