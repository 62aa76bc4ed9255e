//! The deformable families `Γ₂,₂,₂(a,b)` and `Γ₂,₂,₂,₂(a,b,c,d)`.
//!
//! Both are generated by involutions `g_i = r_2(x_i, y_i)` together with the
//! translation `T`, subject to `g_i² = 1` and `g_1 ⋯ g_k T = 1`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{MaassError, Result};
use crate::hyperbolic::{rotation_generator, Moebius, UpperHalfPoint, IDENTITY_TOL};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub genus: u32,
    pub elliptic_orders: Vec<u32>,
    pub num_cusps: u32,
}

impl Signature {
    /// Real dimension `6g - 6 + 2k + 2ν` of the Teichmüller space.
    pub fn teichmuller_dim(&self) -> i64 {
        6 * self.genus as i64 - 6 + 2 * self.elliptic_orders.len() as i64 + 2 * self.num_cusps as i64
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let orders: Vec<String> = self.elliptic_orders.iter().map(|o| o.to_string()).collect();
        write!(f, "{{{},{{{}}},{}}}", self.genus, orders.join(","), self.num_cusps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gamma222,
    Gamma2222,
}

impl Family {
    pub fn num_params(&self) -> usize {
        match self {
            Family::Gamma222 => 2,
            Family::Gamma2222 => 4,
        }
    }

    pub fn num_elliptic(&self) -> usize {
        match self {
            Family::Gamma222 => 3,
            Family::Gamma2222 => 4,
        }
    }

    pub fn axis_names(&self) -> &'static [&'static str] {
        match self {
            Family::Gamma222 => &["a", "b"],
            Family::Gamma2222 => &["a", "b", "c", "d"],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Gamma222 => "gamma222",
            Family::Gamma2222 => "gamma2222",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = MaassError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma222" => Ok(Family::Gamma222),
            "gamma2222" => Ok(Family::Gamma2222),
            other => Err(MaassError::Config(format!("unknown family '{other}'"))),
        }
    }
}

/// A ±1 character on the elliptic generators, trivial on `T`.
///
/// The product relation forces the signs to multiply to `+1`. The trivial
/// character gives ordinary automorphy; `(-1, +1, -1)` on `Γ₂,₂,₂(5,0)` selects
/// the forms on `Γ₀(5)` that are odd under the Fricke involution `g_1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Character(Vec<i8>);

impl Character {
    pub fn trivial(family: Family) -> Self {
        Character(vec![1; family.num_elliptic()])
    }

    pub fn new(family: Family, signs: Vec<i8>) -> Result<Self> {
        if signs.len() != family.num_elliptic() {
            return Err(MaassError::Domain(format!(
                "{family} needs {} character signs, got {}",
                family.num_elliptic(),
                signs.len()
            )));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(MaassError::Domain("character signs must be +1 or -1".into()));
        }
        if signs.iter().map(|&s| s as i32).product::<i32>() != 1 {
            return Err(MaassError::Domain(
                "character signs must multiply to +1 so that T is fixed".into(),
            ));
        }
        Ok(Character(signs))
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn sign(&self, generator: usize) -> f64 {
        self.0[generator] as f64
    }

    pub fn is_trivial(&self) -> bool {
        self.0.iter().all(|&s| s == 1)
    }
}

impl fmt::Display for Character {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&s.join(","))
    }
}

/// One member of a deformable family.
#[derive(Debug, Clone)]
pub struct GroupPresentation {
    pub family: Family,
    pub params: Vec<f64>,
    /// The elliptic generators `g_1..g_k`; `T` is implicit.
    pub elliptic: Vec<Moebius>,
    pub signature: Signature,
    pub elliptic_points: Vec<UpperHalfPoint>,
    pub character: Character,
}

impl GroupPresentation {
    /// All generators, `g_1..g_k` followed by `T`.
    pub fn generators(&self) -> Vec<Moebius> {
        let mut g = self.elliptic.clone();
        g.push(Moebius::t());
        g
    }

    pub fn min_elliptic_height(&self) -> f64 {
        self.elliptic_points.iter().map(|p| p.y()).fold(f64::INFINITY, f64::min)
    }

    /// `g_1 ⋯ g_k T`.
    pub fn relation_product(&self) -> Moebius {
        self.elliptic
            .iter()
            .fold(Moebius::IDENTITY, |acc, g| acc.compose(g))
            .compose(&Moebius::t())
    }

    pub fn with_character(mut self, character: Character) -> Result<Self> {
        if character.signs().len() != self.family.num_elliptic() {
            return Err(MaassError::Domain("character does not match family".into()));
        }
        self.character = character;
        Ok(self)
    }

    /// True when `x -> -x` maps the group (with its character) to itself.
    pub fn has_mirror_symmetry(&self) -> bool {
        const TOL: f64 = 1e-8;
        match self.family {
            Family::Gamma222 => self.params[1].abs() <= TOL,
            Family::Gamma2222 => {
                self.params[1].abs() <= TOL
                    && (self.params[0] + self.params[2]).abs() <= TOL
                    && self.character.signs()[0] == self.character.signs()[2]
            }
        }
    }
}

pub fn build(family: Family, params: &[f64]) -> Result<GroupPresentation> {
    if params.len() != family.num_params() {
        return Err(MaassError::Domain(format!(
            "{family} takes {} parameters, got {}",
            family.num_params(),
            params.len()
        )));
    }
    match family {
        Family::Gamma222 => gamma222(params[0], params[1]),
        Family::Gamma2222 => gamma2222(params[0], params[1], params[2], params[3]),
    }
}

pub fn build_with_character(
    family: Family,
    params: &[f64],
    character: &Character,
) -> Result<GroupPresentation> {
    build(family, params)?.with_character(character.clone())
}

fn domain(msg: String) -> MaassError {
    MaassError::Domain(msg)
}

/// `Γ₂,₂,₂(a,b) = <T, g_1, g_2, g_3>` with `g_1 = r_2(b, 1/√a)`,
/// `g_2 = r_2(x, √y)`, `g_3 = T g_1 g_2`.
pub fn gamma222(a: f64, b: f64) -> Result<GroupPresentation> {
    if !(a > 0.0) || !b.is_finite() {
        return Err(domain(format!("gamma222 needs a > 0, got a = {a}")));
    }
    let big_y = (4.0 / (a * a) + b * b).sqrt();
    let x = 0.5 * (2.0 / a + b + big_y);
    let y = 0.5 * (-4.0 / (a * a) + (1.0 - 2.0 / a + b) * (-b + big_y));
    if !(y > 0.0) {
        return Err(domain(format!(
            "gamma222({a}, {b}): height parameter y = {y} is not positive"
        )));
    }
    let g1 = rotation_generator(2, b, 1.0 / a.sqrt())?;
    let g2 = rotation_generator(2, x, y.sqrt())?;
    let g3 = Moebius::t().compose(&g1).compose(&g2);
    let p3 = g3
        .elliptic_fixed_point()
        .map_err(|_| domain(format!("gamma222({a}, {b}): g_3 is not elliptic")))?;
    Ok(GroupPresentation {
        family: Family::Gamma222,
        params: vec![a, b],
        elliptic: vec![g1, g2, g3],
        signature: Signature {
            genus: 0,
            elliptic_orders: vec![2, 2, 2],
            num_cusps: 1,
        },
        elliptic_points: vec![
            UpperHalfPoint::new(b, 1.0 / a.sqrt())?,
            UpperHalfPoint::new(x, y.sqrt())?,
            p3,
        ],
        character: Character::trivial(Family::Gamma222),
    })
}

/// `Γ₂,₂,₂,₂(a,b,c,d)` with `g_1 = r_2(a,x)`, `g_2 = r_2(b,y)`,
/// `g_3 = r_2(c,z)`, `g_4 = r_2(1/2,d)`.
pub fn gamma2222(a: f64, b: f64, c: f64, d: f64) -> Result<GroupPresentation> {
    if ![a, b, c, d].iter().all(|v| v.is_finite()) {
        return Err(domain("gamma2222 parameters must be finite".into()));
    }
    let pa = 0.5 + a;
    let qc = 0.5 - c;
    if pa.abs() < 1e-300 || qc.abs() < 1e-300 {
        return Err(domain(format!(
            "gamma2222({a}, {b}, {c}, {d}): a = -1/2 or c = 1/2"
        )));
    }
    let shared = pa * (c - 0.5) + d * d;
    let rx = (a - b) * shared / qc;
    let ry = (a - b) * (b - c) / (pa * qc);
    let rz = (b - c) * shared / pa;
    for (name, v) in [("x", rx), ("y", ry), ("z", rz)] {
        if !(v >= 0.0) {
            return Err(domain(format!(
                "gamma2222({a}, {b}, {c}, {d}): radicand for {name} is {v}"
            )));
        }
    }
    let (x, y, z) = (rx.sqrt(), d * ry.sqrt(), rz.sqrt());
    if !(x > 0.0 && y > 0.0 && z > 0.0 && d > 0.0) {
        return Err(domain(format!(
            "gamma2222({a}, {b}, {c}, {d}): non-positive height"
        )));
    }
    let centers = [(a, x), (b, y), (c, z), (0.5, d)];
    let elliptic = centers
        .iter()
        .map(|&(cx, cy)| rotation_generator(2, cx, cy))
        .collect::<Result<Vec<_>>>()?;
    let elliptic_points = centers
        .iter()
        .map(|&(cx, cy)| UpperHalfPoint::new(cx, cy))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupPresentation {
        family: Family::Gamma2222,
        params: vec![a, b, c, d],
        elliptic,
        signature: Signature {
            genus: 0,
            elliptic_orders: vec![2, 2, 2, 2],
            num_cusps: 1,
        },
        elliptic_points,
        character: Character::trivial(Family::Gamma2222),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Specialization {
    pub family: Family,
    pub params: Vec<f64>,
    pub note: &'static str,
}

/// Parameters at which a family coincides with `Γ₀*(q)`.
pub fn arithmetic_specialization(q: u32) -> Result<Specialization> {
    match q {
        5 | 6 | 8 => Ok(Specialization {
            family: Family::Gamma222,
            params: vec![q as f64, 0.0],
            note: "equal to Γ₀*(q)",
        }),
        9 => Ok(Specialization {
            family: Family::Gamma222,
            params: vec![9.0, 1.0 / 6.0],
            note: "Γ₀*(9) is the conjugate by [[1,1/6],[0,1]]; the spectrum is identical",
        }),
        11 => Ok(Specialization {
            family: Family::Gamma2222,
            params: vec![-1.0 / 3.0, 0.0, 1.0 / 3.0, 1.0 / (2.0 * 11f64.sqrt())],
            note: "equal to Γ₀*(11)",
        }),
        other => Err(MaassError::UnsupportedLevel(other)),
    }
}

/// Level of the arithmetic point these parameters sit on, if any.
pub fn arithmetic_level(family: Family, params: &[f64]) -> Option<u32> {
    [5u32, 6, 8, 9, 11].into_iter().find(|&q| {
        let s = arithmetic_specialization(q).expect("listed levels are supported");
        s.family == family
            && s.params.len() == params.len()
            && s.params.iter().zip(params).all(|(u, v)| (u - v).abs() < 1e-6)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// `(a, b) -> (a, -b)`
    Reflect,
    /// `a -> 4a / (a - 4)`
    Dual,
}

pub fn symmetry_image(family: Family, params: &[f64], which: Symmetry) -> Result<Vec<f64>> {
    if family != Family::Gamma222 || params.len() != 2 {
        return Err(domain("parameter symmetries are defined for gamma222 only".into()));
    }
    let (a, b) = (params[0], params[1]);
    match which {
        Symmetry::Reflect => Ok(vec![a, -b]),
        Symmetry::Dual => {
            if (a - 4.0).abs() < 1e-12 {
                Err(domain("a = 4 is the merging of two cusps".into()))
            } else {
                Ok(vec![4.0 * a / (a - 4.0), b])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub max_order_deviation: f64,
    pub product_deviation: f64,
    pub max_deviation: f64,
}

/// Checks `g_i² = ±1` and `g_1 ⋯ g_k T = ±1` numerically.
pub fn validate(group: &GroupPresentation) -> ValidationReport {
    let max_order_deviation = group
        .elliptic
        .iter()
        .map(|g| g.compose(g).distance_to_identity())
        .fold(0.0, f64::max);
    let product_deviation = group.relation_product().distance_to_identity();
    ValidationReport {
        max_order_deviation,
        product_deviation,
        max_deviation: max_order_deviation.max(product_deviation),
    }
}

impl ValidationReport {
    pub fn holds(&self) -> bool {
        self.max_deviation <= IDENTITY_TOL
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma222_at_level_five() {
        let g = gamma222(5.0, 0.0).unwrap();
        let g1 = rotation_generator(2, 0.0, 1.0 / 5f64.sqrt()).unwrap();
        let g2 = rotation_generator(2, 0.4, 0.2).unwrap();
        assert!(g.elliptic[0].approx_eq(&g1, 1e-14));
        assert!(g.elliptic[1].approx_eq(&g2, 1e-14));
        assert!(validate(&g).max_deviation < 1e-12);
        assert_eq!(g.signature.to_string(), "{0,{2,2,2},1}");
        assert_eq!(g.signature.teichmuller_dim(), 2);
        // third elliptic point 1/2 + i/sqrt(20)
        let p = g.elliptic_points[2];
        assert!((p.x() - 0.5).abs() < 1e-12 && (p.y() - 1.0 / 20f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gamma222_off_axis() {
        let g = gamma222(6.0, 0.1).unwrap();
        assert!(validate(&g).max_deviation < 1e-10);
        assert!(g.elliptic_points.iter().all(|p| p.y() > 0.0));
    }

    #[test]
    fn gamma222_rejects_bad_params() {
        assert!(matches!(gamma222(-1.0, 0.0), Err(MaassError::Domain(_))));
        assert!(matches!(gamma222(1.0, 0.0), Err(MaassError::Domain(_))));
    }

    #[test]
    fn gamma2222_at_level_eleven() {
        let d = 1.0 / (2.0 * 11f64.sqrt());
        let g = gamma2222(-1.0 / 3.0, 0.0, 1.0 / 3.0, d).unwrap();
        let h = 1.0 / (3.0 * 11f64.sqrt());
        assert!(g.elliptic[0].approx_eq(&rotation_generator(2, -1.0 / 3.0, h).unwrap(), 1e-13));
        assert!(g.elliptic[1].approx_eq(&rotation_generator(2, 0.0, 1.0 / 11f64.sqrt()).unwrap(), 1e-13));
        assert!(g.elliptic[2].approx_eq(&rotation_generator(2, 1.0 / 3.0, h).unwrap(), 1e-13));
        assert!(validate(&g).max_deviation < 1e-10);
        assert_eq!(g.signature.teichmuller_dim(), 4);
        assert!(g.has_mirror_symmetry());
    }

    #[test]
    fn gamma2222_table_point() {
        let g = gamma2222(-0.31, 0.03, 0.37, 0.1406783).unwrap();
        assert!(validate(&g).holds());
        assert!(gamma2222(0.3, 0.0, -0.3, 0.15).is_err());
    }

    #[test]
    fn specializations() {
        let s = arithmetic_specialization(5).unwrap();
        assert_eq!((s.family, s.params.clone()), (Family::Gamma222, vec![5.0, 0.0]));
        let s = arithmetic_specialization(9).unwrap();
        assert_eq!(s.params, vec![9.0, 1.0 / 6.0]);
        let s = arithmetic_specialization(11).unwrap();
        assert_eq!(s.family, Family::Gamma2222);
        assert!(matches!(arithmetic_specialization(7), Err(MaassError::UnsupportedLevel(7))));
        assert_eq!(arithmetic_level(Family::Gamma222, &[5.0, 0.0]), Some(5));
        assert_eq!(arithmetic_level(Family::Gamma222, &[5.1, 0.0]), None);
    }

    #[test]
    fn symmetries() {
        let d = symmetry_image(Family::Gamma222, &[5.0, 0.0], Symmetry::Dual).unwrap();
        assert!((d[0] - 20.0).abs() < 1e-12);
        let d = symmetry_image(Family::Gamma222, &[8.0, 0.0], Symmetry::Dual).unwrap();
        assert_eq!(d[0], 8.0);
        let r = symmetry_image(Family::Gamma222, &[5.0, 0.2], Symmetry::Reflect).unwrap();
        assert_eq!(r, vec![5.0, -0.2]);
        assert!(symmetry_image(Family::Gamma222, &[4.0, 0.0], Symmetry::Dual).is_err());
    }

    #[test]
    fn corrupted_generator_is_caught() {
        let mut g = gamma222(5.0, 0.0).unwrap();
        g.elliptic[1] = rotation_generator(2, 0.45, 0.2).unwrap();
        assert!(validate(&g).max_deviation > 0.1);
    }

    #[test]
    fn characters() {
        assert!(Character::new(Family::Gamma222, vec![-1, 1, -1]).is_ok());
        assert!(Character::new(Family::Gamma222, vec![-1, 1, 1]).is_err());
        assert!(Character::new(Family::Gamma2222, vec![1, 1, 1]).is_err());
    }
}
