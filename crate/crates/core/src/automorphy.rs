//! The collocation system for a truncated Fourier expansion.
//!
//! A form is written as
//!
//! ```text
//! f(z) = √y Σ_{0<|n|≤M} a_n K_{iR}(2π|n|y) e^{2πinx}
//! ```
//!
//! and automorphy `f(z) = χ(γ) f(γz)` is imposed at points `z_i` on a
//! horizontal line, with `γ` chosen so that `γ z_i` lies higher up. With
//! `a_1 = 1` this is an overdetermined real system in `4M - 2` unknowns whose
//! least-squares residual is near zero only when `R` is an eigenvalue.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::f64::consts::PI;

use crate::bessel::{truncation_level, BesselEvaluator};
use crate::error::{MaassError, Result};
use crate::group::{build_with_character, Character, Family, GroupPresentation};
use crate::hyperbolic::{Moebius, UpperHalfPoint};

/// Longest word over `{g_i, T, T⁻¹}` whose isometric circle is used by the
/// pullback.
pub const MAX_WORD_LENGTH: usize = 4;

const MOVE_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Letter {
    /// The elliptic generator `g_i` (an involution).
    Gen(usize),
    /// `T^k`.
    Shift(i64),
}

/// A group element as a sequence of letters, applied left to right.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Word(pub Vec<Letter>);

impl Word {
    fn push(&mut self, letter: Letter) {
        match (self.0.last_mut(), letter) {
            (Some(Letter::Shift(a)), Letter::Shift(b)) => {
                *a += b;
                if *a == 0 {
                    self.0.pop();
                }
            }
            (_, Letter::Shift(0)) => {}
            _ => self.0.push(letter),
        }
    }

    /// The matrix of the element in `group`.
    pub fn matrix(&self, group: &GroupPresentation) -> Moebius {
        self.0.iter().fold(Moebius::IDENTITY, |acc, l| {
            let m = match *l {
                Letter::Gen(i) => group.elliptic[i],
                Letter::Shift(k) => Moebius::translation(k as f64),
            };
            m.compose(&acc)
        })
    }

    pub fn character(&self, chi: &Character) -> f64 {
        self.0
            .iter()
            .map(|l| match *l {
                Letter::Gen(i) => chi.sign(i),
                Letter::Shift(_) => 1.0,
            })
            .product()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub word: Word,
    pub point: UpperHalfPoint,
}

/// Sample points on `y = y0` together with their pulled-back images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollocationSet {
    pub y0: f64,
    pub m: usize,
    pub oversample: f64,
    pub offset: f64,
    pub points: Vec<UpperHalfPoint>,
    pub images: Vec<Image>,
    /// Grid points dropped because no short word lifts them.
    pub dropped: usize,
}

impl CollocationSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min_image_height(&self) -> f64 {
        self.images.iter().map(|im| im.point.y()).fold(f64::INFINITY, f64::min)
    }

    /// Same points and words, images recomputed in another member of the
    /// family. Automorphy holds for every group element, so the equations
    /// stay exact; only their conditioning drifts.
    pub fn reevaluate(&self, group: &GroupPresentation) -> CollocationSet {
        let images = self
            .points
            .iter()
            .zip(&self.images)
            .map(|(z, im)| Image {
                word: im.word.clone(),
                point: im.word.matrix(group).apply(*z),
            })
            .collect();
        CollocationSet {
            images,
            ..self.clone()
        }
    }
}

struct Circle {
    matrix: Moebius,
    word: Vec<Letter>,
    center: f64,
    radius: f64,
}

/// Isometric circles of radius above `min_radius` among words of length up
/// to [`MAX_WORD_LENGTH`], one per (center mod 1, radius).
fn circle_table(group: &GroupPresentation, min_radius: f64) -> Vec<Circle> {
    let mut alphabet: Vec<(Letter, Moebius)> = group
        .elliptic
        .iter()
        .enumerate()
        .map(|(i, g)| (Letter::Gen(i), *g))
        .collect();
    alphabet.push((Letter::Shift(1), Moebius::translation(1.0)));
    alphabet.push((Letter::Shift(-1), Moebius::translation(-1.0)));

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut frontier: Vec<(Moebius, Vec<Letter>)> = vec![(Moebius::IDENTITY, Vec::new())];
    for _ in 0..MAX_WORD_LENGTH {
        let mut next = Vec::with_capacity(frontier.len() * alphabet.len());
        for (m, w) in &frontier {
            for (letter, a) in &alphabet {
                if let (Some(last), Letter::Gen(_)) = (w.last(), letter) {
                    if last == letter {
                        continue; // g_i² = 1
                    }
                }
                if let (Some(Letter::Shift(s)), Letter::Shift(t)) = (w.last(), letter) {
                    if s + t == 0 {
                        continue;
                    }
                }
                let mm = m.compose(a);
                let mut ww = w.clone();
                ww.push(*letter);
                if let Some((center, radius)) = mm.isometric_circle() {
                    let reduced = center - (center + 0.5).floor();
                    let key = ((reduced * 1e9).round() as i64, (radius * 1e9).round() as i64);
                    if radius > min_radius && seen.insert(key) {
                        out.push(Circle {
                            matrix: mm,
                            word: ww.clone(),
                            center,
                            radius,
                        });
                    }
                }
                next.push((mm, ww));
            }
        }
        frontier = next;
    }
    out
}

/// Greedy pullback: repeatedly apply the map (from the circle table, after an
/// integer shift) that raises the point most, reducing `x` modulo 1 between
/// steps.
fn pull_back(circles: &[Circle], z: UpperHalfPoint) -> (UpperHalfPoint, Word) {
    let (mut z, s0) = z.reduce_mod_one();
    let mut word = Word::default();
    word.push(Letter::Shift(s0));
    for _ in 0..500 {
        let mut best: Option<(UpperHalfPoint, i64, usize)> = None;
        for (idx, c) in circles.iter().enumerate() {
            let k = (c.center - z.x()).round();
            // only points inside the isometric circle move up
            if (z.x() + k - c.center).hypot(z.y()) >= c.radius {
                continue;
            }
            let shifted = UpperHalfPoint::new(z.x() + k, z.y()).expect("height unchanged");
            let w = c.matrix.apply(shifted);
            if w.y() > z.y() * (1.0 + MOVE_TOL) && best.map_or(true, |(b, _, _)| w.y() > b.y()) {
                best = Some((w, k as i64, idx));
            }
        }
        let Some((w, k, idx)) = best else { break };
        word.push(Letter::Shift(k));
        for l in circles[idx].word.iter().rev() {
            word.push(*l);
        }
        let (reduced, s) = w.reduce_mod_one();
        word.push(Letter::Shift(s));
        z = reduced;
    }
    (z, word)
}

/// `N = ⌈oversample · 4M⌉` points `x_i = -1/2 + (i - 1/2 + offset)/N` at
/// height `y0`, each paired with its pullback.
///
/// A point that no word raises is shifted by half a grid step and retried,
/// then dropped if it still does not move.
pub fn choose_points(
    group: &GroupPresentation,
    m: usize,
    oversample: f64,
    y0: f64,
) -> Result<CollocationSet> {
    choose_points_with_offset(group, m, oversample, y0, 0.0)
}

pub fn choose_points_with_offset(
    group: &GroupPresentation,
    m: usize,
    oversample: f64,
    y0: f64,
    offset: f64,
) -> Result<CollocationSet> {
    if !(y0 > 0.0) || y0 >= group.min_elliptic_height() {
        return Err(MaassError::Domain(format!(
            "y0 = {y0} must lie in (0, {}) below every elliptic point",
            group.min_elliptic_height()
        )));
    }
    if !(oversample >= 1.1) || m == 0 {
        return Err(MaassError::Domain(format!(
            "need M ≥ 1 and oversample ≥ 1.1 (got M = {m}, oversample = {oversample})"
        )));
    }
    let n = (oversample * 4.0 * m as f64).ceil() as usize;
    let circles = circle_table(group, y0);
    let mut points = Vec::with_capacity(n);
    let mut images = Vec::with_capacity(n);
    let mut dropped = 0;
    for i in 0..n {
        let x = -0.5 + (i as f64 + 0.5 + offset) / n as f64;
        let mut moved = None;
        for dx in [0.0, 0.5 / n as f64] {
            let z = UpperHalfPoint::new(x + dx, y0)?;
            let (w, word) = pull_back(&circles, z);
            if w.y() > y0 * (1.0 + MOVE_TOL) {
                moved = Some((z.reduce_mod_one().0, w, word));
                break;
            }
        }
        match moved {
            Some((z, w, word)) => {
                points.push(z);
                images.push(Image { word, point: w });
            }
            None => dropped += 1,
        }
    }
    let required = 4 * m + 2;
    if points.len() < required {
        return Err(MaassError::DegenerateCollocation {
            moved: points.len(),
            required,
        });
    }
    Ok(CollocationSet {
        y0,
        m,
        oversample,
        offset,
        points,
        images,
        dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Cusp,
    WithConstantTerm,
}

/// What a column of the real system stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Column {
    Re(i64),
    Im(i64),
    /// `a₀` in `√y (a₀ cos(R ln y) + b₀ sin(R ln y))`.
    A0,
    B0,
}

/// Scaling applied to the columns and right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    pub columns: Vec<f64>,
    pub rhs: f64,
}

/// Real least-squares system `A x = b`. Rows `2i` and `2i + 1` hold the real
/// and imaginary parts of the identity at point `i`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub column_scales: Vec<f64>,
    pub rhs_scale: f64,
    pub layout: Vec<Column>,
    pub m: usize,
    pub n_points: usize,
    pub y0: f64,
    pub r: f64,
    pub mode: Mode,
    /// Index `n` with `a_n = 1` moved to the right-hand side; `None` for the
    /// homogeneous system.
    pub normalization: Option<i64>,
}

impl LinearSystem {
    pub fn columns(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn scaling(&self) -> Scaling {
        Scaling {
            columns: self.column_scales.clone(),
            rhs: self.rhs_scale,
        }
    }

    /// Fixes the unknown of `column` to `value` (in unscaled units) and
    /// removes it from the system.
    pub fn pin(&self, column: Column, value: f64) -> Result<LinearSystem> {
        let j = self
            .layout
            .iter()
            .position(|c| *c == column)
            .ok_or_else(|| MaassError::Domain(format!("no column {column:?} to pin")))?;
        let xi = self.column_scales[j] * value / self.rhs_scale;
        let rhs = &self.rhs - self.matrix.column(j) * xi;
        let mut out = self.clone();
        out.matrix = self.matrix.clone().remove_column(j);
        out.rhs = rhs;
        out.column_scales.remove(j);
        out.layout.remove(j);
        Ok(out)
    }
}

fn column_map(m: usize, normalization: Option<i64>, mode: Mode) -> (Vec<Column>, Vec<Option<usize>>) {
    let mi = m as i64;
    let mut layout = Vec::new();
    let mut index = vec![None; 2 * m + 1];
    for n in -mi..=mi {
        if n == 0 || Some(n) == normalization {
            continue;
        }
        index[(n + mi) as usize] = Some(layout.len());
        layout.push(Column::Re(n));
        layout.push(Column::Im(n));
    }
    if mode == Mode::WithConstantTerm {
        layout.push(Column::A0);
        layout.push(Column::B0);
    }
    (layout, index)
}

/// Terms `√y K(2π|n|y) e^{2πinx}` for `n = -M..M` (slot `M` is `n = 0`, left zero).
fn expansion_terms(bessel: &BesselEvaluator, z: UpperHalfPoint, m: usize, out: &mut [Complex64]) -> Result<()> {
    let (x, y) = (z.x(), z.y());
    let sy = y.sqrt();
    let step = Complex64::from_polar(1.0, 2.0 * PI * x);
    let mut e = Complex64::new(1.0, 0.0);
    out[m] = Complex64::new(0.0, 0.0);
    for n in 1..=m {
        e *= step;
        let k = sy * bessel.k_scaled(2.0 * PI * n as f64 * y)?;
        out[m + n] = e * k;
        out[m - n] = e.conj() * k;
    }
    Ok(())
}

/// Builds the system with `a_1 = 1`.
pub fn assemble(
    group: &GroupPresentation,
    r: f64,
    coll: &CollocationSet,
    bessel: &BesselEvaluator,
    mode: Mode,
) -> Result<LinearSystem> {
    assemble_with(group, r, coll, bessel, mode, Some(1), None)
}

/// General assembly: any normalization index (or none), and optionally a
/// fixed scaling instead of the unit-max column scaling.
pub fn assemble_with(
    group: &GroupPresentation,
    r: f64,
    coll: &CollocationSet,
    bessel: &BesselEvaluator,
    mode: Mode,
    normalization: Option<i64>,
    scaling: Option<&Scaling>,
) -> Result<LinearSystem> {
    let m = coll.m;
    let mi = m as i64;
    if let Some(n0) = normalization {
        if n0 == 0 || n0.abs() > mi {
            return Err(MaassError::Domain(format!("normalization index {n0} outside 0 < |n| ≤ {m}")));
        }
    }
    let (layout, index) = column_map(m, normalization, mode);
    let rows = 2 * coll.len();
    let cols = layout.len();
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut b = DVector::<f64>::zeros(rows);
    let mut here = vec![Complex64::new(0.0, 0.0); 2 * m + 1];
    let mut there = here.clone();

    // every point shares y0, so its Bessel factors are computed once
    let base_height = coll.y0;
    for (i, (z, image)) in coll.points.iter().zip(&coll.images).enumerate() {
        debug_assert!((z.y() - base_height).abs() < 1e-15);
        let chi = image.word.character(&group.character);
        expansion_terms(bessel, *z, m, &mut here)?;
        expansion_terms(bessel, image.point, m, &mut there)?;
        let (re_row, im_row) = (2 * i, 2 * i + 1);
        for n in -mi..=mi {
            if n == 0 {
                continue;
            }
            let s = (n + mi) as usize;
            let v = here[s] - there[s] * chi;
            match index[s] {
                Some(j) => {
                    a[(re_row, j)] = v.re;
                    a[(re_row, j + 1)] = -v.im;
                    a[(im_row, j)] = v.im;
                    a[(im_row, j + 1)] = v.re;
                }
                None => {
                    b[re_row] = -v.re;
                    b[im_row] = -v.im;
                }
            }
        }
        if mode == Mode::WithConstantTerm {
            let (c0, s0) = constant_term_basis(r, z.y());
            let (c1, s1) = constant_term_basis(r, image.point.y());
            a[(re_row, cols - 2)] = c0 - chi * c1;
            a[(re_row, cols - 1)] = s0 - chi * s1;
        }
    }

    let (column_scales, rhs_scale) = match scaling {
        Some(s) => {
            if s.columns.len() != cols {
                return Err(MaassError::Domain("fixed scaling has the wrong column count".into()));
            }
            (s.columns.clone(), s.rhs)
        }
        None => {
            let cs = (0..cols)
                .map(|j| {
                    let mx = a.column(j).amax();
                    if mx > 0.0 { mx } else { 1.0 }
                })
                .collect::<Vec<_>>();
            let bs = b.amax();
            (cs, if bs > 0.0 { bs } else { 1.0 })
        }
    };
    for (j, s) in column_scales.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    b.scale_mut(1.0 / rhs_scale);

    Ok(LinearSystem {
        matrix: a,
        rhs: b,
        column_scales,
        rhs_scale,
        layout,
        m,
        n_points: coll.len(),
        y0: coll.y0,
        r,
        mode,
        normalization,
    })
}

/// `(√y cos(R ln y), √y sin(R ln y))`.
pub fn constant_term_basis(r: f64, y: f64) -> (f64, f64) {
    let (s, c) = (r * y.ln()).sin_cos();
    let sy = y.sqrt();
    (sy * c, sy * s)
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub r: f64,
    pub m: usize,
    pub n_points: usize,
    pub y0: f64,
    /// `a_n` for `n = -M..M` at slot `n + M`; slot `M` is unused.
    pub coefficients: Vec<Complex64>,
    /// `(a₀, b₀)` in the same units as the `a_n`.
    pub constant_term: Option<(f64, f64)>,
    pub residual: f64,
    pub residual_vector: DVector<f64>,
    pub normalization: i64,
    pub rank: usize,
}

impl SolveResult {
    pub fn coeff(&self, n: i64) -> Complex64 {
        let mi = self.m as i64;
        if n.abs() > mi {
            Complex64::new(0.0, 0.0)
        } else {
            self.coefficients[(n + mi) as usize]
        }
    }

    /// Coefficients `a_1..a_M`.
    pub fn positive_coefficients(&self) -> Vec<Complex64> {
        (1..=self.m as i64).map(|n| self.coeff(n)).collect()
    }

    /// Value of the truncated expansion (scaled by `e^{πR/2}`) at `z`.
    pub fn evaluate(&self, bessel: &BesselEvaluator, z: UpperHalfPoint) -> Result<Complex64> {
        let mut terms = vec![Complex64::new(0.0, 0.0); 2 * self.m + 1];
        expansion_terms(bessel, z, self.m, &mut terms)?;
        let mut f: Complex64 = terms.iter().zip(&self.coefficients).map(|(t, a)| t * a).sum();
        if let Some((a0, b0)) = self.constant_term {
            let (c, s) = constant_term_basis(self.r, z.y());
            f += a0 * c + b0 * s;
        }
        Ok(f)
    }
}

/// Least squares by Householder QR.
pub fn solve(system: &LinearSystem) -> Result<SolveResult> {
    let (rows, cols) = system.matrix.shape();
    if rows < cols + 2 {
        return Err(MaassError::Domain(format!(
            "system has {rows} rows for {cols} unknowns; need at least {}",
            cols + 2
        )));
    }
    let qr = system.matrix.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().amax();
    let rank = r.diagonal().iter().filter(|v| v.abs() > RANK_TOL * diag_max).count();
    if rank + 1 < cols {
        return Err(MaassError::RankDeficiency { rank, columns: cols });
    }
    let mut qtb = system.rhs.clone();
    qr.q_tr_mul(&mut qtb);
    let top = qtb.rows(0, cols).into_owned();
    let xi = r
        .solve_upper_triangular(&top)
        .ok_or(MaassError::RankDeficiency { rank, columns: cols })?;
    let residual_vector = &system.rhs - &system.matrix * &xi;
    let residual = residual_vector.norm();

    let m = system.m;
    let mi = m as i64;
    let mut coefficients = vec![Complex64::new(0.0, 0.0); 2 * m + 1];
    if let Some(n0) = system.normalization {
        coefficients[(n0 + mi) as usize] = Complex64::new(1.0, 0.0);
    }
    let mut a0b0 = (0.0, 0.0);
    for (j, col) in system.layout.iter().enumerate() {
        let v = xi[j] * system.rhs_scale / system.column_scales[j];
        match *col {
            Column::Re(n) => coefficients[(n + mi) as usize].re = v,
            Column::Im(n) => coefficients[(n + mi) as usize].im = v,
            Column::A0 => a0b0.0 = v,
            Column::B0 => a0b0.1 = v,
        }
    }
    let has_constant = system.layout.iter().any(|c| matches!(c, Column::A0 | Column::B0));
    Ok(SolveResult {
        r: system.r,
        m,
        n_points: system.n_points,
        y0: system.y0,
        coefficients,
        constant_term: has_constant.then_some(a0b0),
        residual,
        residual_vector,
        normalization: system.normalization.unwrap_or(0),
        rank,
    })
}

/// Singular values of the homogeneous system (all `4M` columns, no
/// normalization), ascending.
pub fn homogeneous_singular_values(
    group: &GroupPresentation,
    r: f64,
    coll: &CollocationSet,
    bessel: &BesselEvaluator,
) -> Result<Vec<f64>> {
    let sys = assemble_with(group, r, coll, bessel, Mode::Cusp, None, None)?;
    let mut sv: Vec<f64> = sys.matrix.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| a.total_cmp(b));
    Ok(sv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Truncation target.
    pub eps: f64,
    pub oversample: f64,
    /// `y0` as a fraction of the lowest elliptic point height.
    pub y0_factor: f64,
    /// Fixed truncation order; derived from `eps` when absent.
    pub m: Option<usize>,
    /// Offset of the collocation grid, in grid steps.
    pub offset: f64,
    pub mode: Mode,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            oversample: 1.25,
            y0_factor: 0.8,
            m: None,
            offset: 0.0,
            mode: Mode::Cusp,
        }
    }
}

impl SolverSettings {
    /// Residual below which a minimum counts as an eigenvalue.
    pub fn threshold(&self) -> f64 {
        (100.0 * self.eps).max(1e-4)
    }
}

/// Builds [`Setup`]s for one family and character.
#[derive(Debug, Clone)]
pub struct Detector {
    pub family: Family,
    pub character: Character,
    pub settings: SolverSettings,
}

impl Detector {
    pub fn new(family: Family, character: Character, settings: SolverSettings) -> Self {
        Self {
            family,
            character,
            settings,
        }
    }

    /// Collocation for `params`, sized for spectral parameters up to `r_max`.
    pub fn setup(&self, params: &[f64], r_max: f64) -> Result<Setup> {
        let group = build_with_character(self.family, params, &self.character)?;
        Setup::new(group, self.settings.clone(), r_max)
    }
}

/// A group with a fixed collocation set; evaluates the detector at any `R`.
#[derive(Debug, Clone)]
pub struct Setup {
    pub group: GroupPresentation,
    pub coll: CollocationSet,
    pub settings: SolverSettings,
}

impl Setup {
    pub fn new(group: GroupPresentation, settings: SolverSettings, r_max: f64) -> Result<Self> {
        let y0 = settings.y0_factor * group.min_elliptic_height();
        let m = match settings.m {
            Some(m) => m,
            None => truncation_level(r_max, y0, settings.eps)?,
        };
        let coll = choose_points_with_offset(&group, m, settings.oversample, y0, settings.offset)?;
        Ok(Self {
            group,
            coll,
            settings,
        })
    }

    pub fn m(&self) -> usize {
        self.coll.m
    }

    /// The same words evaluated in a nearby member of the family.
    pub fn with_params(&self, params: &[f64]) -> Result<Setup> {
        let group = build_with_character(self.group.family, params, &self.group.character)?;
        let coll = self.coll.reevaluate(&group);
        Ok(Setup {
            group,
            coll,
            settings: self.settings.clone(),
        })
    }

    /// A fresh collocation set with the grid shifted by `offset` steps.
    pub fn with_offset(&self, offset: f64) -> Result<Setup> {
        let coll = choose_points_with_offset(
            &self.group,
            self.coll.m,
            self.coll.oversample,
            self.coll.y0,
            offset,
        )?;
        let mut settings = self.settings.clone();
        settings.offset = offset;
        Ok(Setup {
            group: self.group.clone(),
            coll,
            settings,
        })
    }

    pub fn system(&self, r: f64, normalization: Option<i64>, scaling: Option<&Scaling>) -> Result<LinearSystem> {
        let bessel = BesselEvaluator::new(r);
        assemble_with(&self.group, r, &self.coll, &bessel, self.settings.mode, normalization, scaling)
    }

    /// Solves with `a_1 = 1`, falling back to `a_2 = 1` and then `a_3 = 1`
    /// when the system is rank deficient.
    pub fn solve_at(&self, r: f64) -> Result<SolveResult> {
        let mut last = None;
        for n0 in 1..=3i64.min(self.m() as i64) {
            match solve(&self.system(r, Some(n0), None)?) {
                Ok(s) => return Ok(s),
                Err(e @ MaassError::RankDeficiency { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one normalization tried"))
    }

    /// Solves with `a_{n0} = 1`.
    pub fn solve_normalized(&self, r: f64, n0: i64) -> Result<SolveResult> {
        solve(&self.system(r, Some(n0), None)?)
    }

    /// Detector value; failures count as "far from an eigenvalue".
    pub fn residual_at(&self, r: f64) -> f64 {
        self.solve_at(r).map(|s| s.residual).unwrap_or(f64::INFINITY)
    }

    /// Detector value with `a_{n0} = 1`. A form whose `a_{n0}` vanishes is
    /// invisible to this normalization.
    pub fn residual_normalized(&self, r: f64, n0: i64) -> f64 {
        self.solve_normalized(r, n0).map(|s| s.residual).unwrap_or(f64::INFINITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{gamma222, gamma2222};

    fn level5() -> GroupPresentation {
        gamma222(5.0, 0.0).unwrap()
    }

    #[test]
    fn words_compose_in_order() {
        let g = level5();
        let mut w = Word::default();
        w.push(Letter::Shift(2));
        w.push(Letter::Gen(0));
        w.push(Letter::Shift(-1));
        w.push(Letter::Shift(1));
        assert_eq!(w.len(), 2);
        let expected = g.elliptic[0].compose(&Moebius::translation(2.0));
        assert!(w.matrix(&g).approx_eq(&expected, 1e-14));
    }

    #[test]
    fn collocation_moves_every_point_up() {
        let g = level5();
        let c = choose_points(&g, 40, 1.25, 0.08).unwrap();
        assert_eq!(c.len() + c.dropped, 200);
        assert!(c.len() > 4 * 40);
        assert!(c.min_image_height() > 0.08);
        for (z, im) in c.points.iter().zip(&c.images) {
            assert!(z.x() >= -0.5 && z.x() < 0.5);
            let w = im.word.matrix(&g).apply(*z);
            assert!((w.x() - im.point.x()).abs() < 1e-9 && (w.y() - im.point.y()).abs() < 1e-9);
        }
    }

    #[test]
    fn collocation_rejects_bad_height() {
        let g = level5();
        assert!(choose_points(&g, 10, 1.25, 0.5).is_err());
        assert!(choose_points(&g, 10, 1.0, 0.1).is_err());
    }

    #[test]
    fn column_counts_and_scaling() {
        let g = level5();
        let c = choose_points(&g, 12, 1.25, 0.16).unwrap();
        let ev = BesselEvaluator::new(7.0);
        let s = assemble(&g, 7.0, &c, &ev, Mode::Cusp).unwrap();
        assert_eq!(s.columns(), 4 * 12 - 2);
        assert_eq!(s.matrix.nrows(), 2 * c.len());
        for j in 0..s.columns() {
            assert!((s.matrix.column(j).amax() - 1.0).abs() < 1e-15);
        }
        let t = assemble(&g, 7.0, &c, &ev, Mode::WithConstantTerm).unwrap();
        assert_eq!(t.columns(), 4 * 12);
    }

    #[test]
    fn consistent_system_is_recovered() {
        let a = DMatrix::from_fn(12, 4, |i, j| ((i * 7 + j * 3) as f64).sin() + if i == j { 2.0 } else { 0.0 });
        let x = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.5]);
        let sys = LinearSystem {
            rhs: &a * &x,
            matrix: a,
            column_scales: vec![1.0; 4],
            rhs_scale: 1.0,
            layout: vec![Column::Re(-1), Column::Im(-1), Column::Re(2), Column::Im(2)],
            m: 2,
            n_points: 6,
            y0: 0.1,
            r: 1.0,
            mode: Mode::Cusp,
            normalization: Some(1),
        };
        let s = solve(&sys).unwrap();
        assert!(s.residual < 1e-12);
        assert!((s.coeff(-1) - Complex64::new(0.3, -1.0)).norm() < 1e-12);
        assert!((s.coeff(2) - Complex64::new(2.0, 0.5)).norm() < 1e-12);
        assert_eq!(s.coeff(1), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let a = DMatrix::from_fn(10, 4, |i, j| if j < 2 { (i + 1) as f64 } else { (i * j) as f64 });
        let sys = LinearSystem {
            rhs: DVector::zeros(10),
            matrix: a,
            column_scales: vec![1.0; 4],
            rhs_scale: 1.0,
            layout: vec![Column::Re(-1), Column::Im(-1), Column::Re(2), Column::Im(2)],
            m: 2,
            n_points: 5,
            y0: 0.1,
            r: 1.0,
            mode: Mode::Cusp,
            normalization: Some(1),
        };
        assert!(matches!(solve(&sys), Err(MaassError::RankDeficiency { .. })));
    }

    #[test]
    fn detector_is_order_one_off_spectrum() {
        let setup = Setup::new(level5(), SolverSettings { m: Some(16), ..Default::default() }, 6.0).unwrap();
        let r = setup.residual_at(6.3);
        assert!(r > 0.05, "{r}");
    }

    #[test]
    fn pinning_removes_a_column() {
        let g = level5();
        let c = choose_points(&g, 10, 1.25, 0.16).unwrap();
        let ev = BesselEvaluator::new(4.0);
        let s = assemble(&g, 4.0, &c, &ev, Mode::WithConstantTerm).unwrap();
        let p = s.pin(Column::A0, 0.0).unwrap().pin(Column::B0, 0.0).unwrap();
        let cusp = assemble(&g, 4.0, &c, &ev, Mode::Cusp).unwrap();
        assert_eq!(p.columns(), cusp.columns());
        let (x, y) = (solve(&p).unwrap(), solve(&cusp).unwrap());
        assert!((x.residual - y.residual).abs() < 1e-10 * y.residual.max(1e-300) + 1e-14);
    }

    #[test]
    fn gamma2222_collocation() {
        let d = 1.0 / (2.0 * 11f64.sqrt());
        let g = gamma2222(-1.0 / 3.0, 0.0, 1.0 / 3.0, d).unwrap();
        let y0 = 0.8 * g.min_elliptic_height();
        let c = choose_points(&g, 20, 1.25, y0).unwrap();
        assert!(c.min_image_height() > y0);
    }
}
