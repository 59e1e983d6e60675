//! Periodic lattices, configurations and neighborhood-local updates.
//!
//! Sites are indexed row-major: on a 2D lattice with sides `[rows, cols]`
//! the site at coordinates `(r, c)` has index `r * cols + c`. Offsets are
//! written as `[d_row, d_col]`; a 1D lattice only uses the first component.

use crate::error::{Error, Result};

/// Per-site species value.
pub type Species = i8;

/// A relative displacement `[d0, d1]` on the lattice.
pub type Offset = [i32; 2];

/// A periodic 1D or 2D lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    sides: Vec<usize>,
    n: usize,
}

impl Lattice {
    pub fn new(sides: &[usize]) -> Result<Self> {
        if sides.is_empty() || sides.len() > 2 {
            return Err(Error::InvalidLattice(format!(
                "dimension must be 1 or 2, got {}",
                sides.len()
            )));
        }
        if sides.contains(&0) {
            return Err(Error::InvalidLattice(
                "side lengths must be positive".into(),
            ));
        }
        let n = sides.iter().product();
        Ok(Self {
            sides: sides.to_vec(),
            n,
        })
    }

    pub fn one_d(n: usize) -> Result<Self> {
        Self::new(&[n])
    }

    pub fn two_d(rows: usize, cols: usize) -> Result<Self> {
        Self::new(&[rows, cols])
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn dimension(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn check_site(&self, x: usize) -> Result<()> {
        if x < self.n {
            Ok(())
        } else {
            Err(Error::InvalidSite { site: x, n: self.n })
        }
    }

    /// Coordinates of site `x`; the second entry is 0 on a 1D lattice.
    pub fn coords(&self, x: usize) -> [usize; 2] {
        match self.sides.as_slice() {
            [_] => [x, 0],
            [_, cols] => [x / cols, x % cols],
            _ => unreachable!(),
        }
    }

    /// Site index of (periodically wrapped) coordinates.
    pub fn site_at(&self, coords: [i64; 2]) -> usize {
        match self.sides.as_slice() {
            [n] => coords[0].rem_euclid(*n as i64) as usize,
            [rows, cols] => {
                let r = coords[0].rem_euclid(*rows as i64) as usize;
                let c = coords[1].rem_euclid(*cols as i64) as usize;
                r * cols + c
            }
            _ => unreachable!(),
        }
    }

    /// The site reached from `x` by `offset`, wrapping periodically.
    pub fn shift(&self, x: usize, offset: Offset) -> usize {
        let [a, b] = self.coords(x);
        self.site_at([a as i64 + offset[0] as i64, b as i64 + offset[1] as i64])
    }

    /// Periodic L1 distance between two sites.
    pub fn distance(&self, x: usize, y: usize) -> usize {
        let cx = self.coords(x);
        let cy = self.coords(y);
        self.sides
            .iter()
            .enumerate()
            .map(|(axis, &side)| {
                let d = cx[axis].abs_diff(cy[axis]);
                d.min(side - d)
            })
            .sum()
    }

    /// Unit offsets along each lattice axis (positive direction).
    pub fn axis_units(&self) -> Vec<Offset> {
        match self.dimension() {
            1 => vec![[1, 0]],
            _ => vec![[1, 0], [0, 1]],
        }
    }
}

/// Ordered set of admissible species values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeciesSet {
    values: Vec<Species>,
    vacant: Option<Species>,
}

impl SpeciesSet {
    pub fn new(values: Vec<Species>, vacant: Option<Species>) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if values[..i].contains(v) {
                return Err(Error::InvalidSpecies(*v));
            }
        }
        if let Some(v) = vacant {
            if !values.contains(&v) {
                return Err(Error::InvalidSpecies(v));
            }
        }
        Ok(Self { values, vacant })
    }

    /// `{0, 1}` lattice gas, 0 vacant.
    pub fn binary() -> Self {
        Self {
            values: vec![0, 1],
            vacant: Some(0),
        }
    }

    /// `{-1, 0, 1}` = CO, vacant, O.
    pub fn co_oxidation() -> Self {
        Self {
            values: vec![-1, 0, 1],
            vacant: Some(0),
        }
    }

    pub fn values(&self) -> &[Species] {
        &self.values
    }

    pub fn vacant(&self) -> Option<Species> {
        self.vacant
    }

    pub fn contains(&self, s: Species) -> bool {
        self.values.contains(&s)
    }

    pub fn is_binary(&self) -> bool {
        self.values.len() == 2 && self.contains(0) && self.contains(1)
    }
}

/// Species value at every lattice site.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    sites: Vec<Species>,
}

impl Configuration {
    pub fn filled(n: usize, value: Species) -> Self {
        Self {
            sites: vec![value; n],
        }
    }

    pub fn from_vec(sites: Vec<Species>) -> Self {
        Self { sites }
    }

    /// Checks every entry against `species`.
    pub fn validate(&self, species: &SpeciesSet) -> Result<()> {
        match self.sites.iter().find(|s| !species.contains(**s)) {
            Some(&bad) => Err(Error::InvalidSpecies(bad)),
            None => Ok(()),
        }
    }

    #[inline]
    pub fn get(&self, x: usize) -> Species {
        self.sites[x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, value: Species) {
        self.sites[x] = value;
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn as_slice(&self) -> &[Species] {
        &self.sites
    }

    /// Number of sites whose value differs from `vacant`.
    pub fn occupied(&self, vacant: Species) -> usize {
        self.sites.iter().filter(|&&s| s != vacant).count()
    }
}

/// Ordered neighborhood `(x_1 = x, x_2, ..., x_k)` as relative offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodShape {
    offsets: Vec<Offset>,
}

impl NeighborhoodShape {
    pub fn new(offsets: Vec<Offset>) -> Result<Self> {
        if offsets.first() != Some(&[0, 0]) {
            return Err(Error::InvalidShape(
                "first offset must be the site itself".into(),
            ));
        }
        for (i, o) in offsets.iter().enumerate() {
            if offsets[..i].contains(o) {
                return Err(Error::InvalidShape(format!("duplicate offset {o:?}")));
            }
        }
        Ok(Self { offsets })
    }

    pub fn single_site() -> Self {
        Self {
            offsets: vec![[0, 0]],
        }
    }

    /// `(self, left, right)` on a 1D lattice.
    pub fn nearest_neighbor_1d() -> Self {
        Self {
            offsets: vec![[0, 0], [-1, 0], [1, 0]],
        }
    }

    /// Self followed by the four axis neighbors, counter-clockwise from east:
    /// `x_2 = E [0,1]`, `x_3 = N [1,0]`, `x_4 = W [0,-1]`, `x_5 = S [-1,0]`.
    pub fn von_neumann_2d() -> Self {
        Self {
            offsets: vec![[0, 0], [0, 1], [1, 0], [0, -1], [-1, 0]],
        }
    }

    /// 17-site neighborhood of the CO oxidation model with diffusion.
    ///
    /// `x_1` is the site itself; `x_2..x_9` run counter-clockwise around it
    /// starting east, so even slots (2,4,6,8) are axis neighbors and odd
    /// slots (3,5,7,9) diagonal ones. `x_10..x_17` are the outer sites
    /// adjacent to the diagonals, counter-clockwise starting at `[-1, 2]`,
    /// which gives `D_3 = {2, 4, 11, 12}`.
    pub fn evans_2d() -> Self {
        Self {
            offsets: vec![
                [0, 0],
                [0, 1],
                [1, 1],
                [1, 0],
                [1, -1],
                [0, -1],
                [-1, -1],
                [-1, 0],
                [-1, 1],
                [-1, 2],
                [1, 2],
                [2, 1],
                [2, -1],
                [1, -2],
                [-1, -2],
                [-2, -1],
                [-2, 1],
            ],
        }
    }

    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    pub fn size(&self) -> usize {
        self.offsets.len()
    }

    /// Zero-based slots holding unit-distance (axis) neighbors.
    pub fn axis_slots(&self) -> Vec<usize> {
        self.offsets
            .iter()
            .enumerate()
            .filter(|(_, o)| o[0].abs() + o[1].abs() == 1)
            .map(|(i, _)| i)
            .collect()
    }

    /// Largest extent of the shape along any axis.
    pub fn diameter(&self) -> usize {
        (0..2)
            .map(|axis| {
                let lo = self.offsets.iter().map(|o| o[axis]).min().unwrap_or(0);
                let hi = self.offsets.iter().map(|o| o[axis]).max().unwrap_or(0);
                (hi - lo) as usize
            })
            .max()
            .unwrap_or(0)
    }

    /// Offsets negated: the sites whose neighborhood contains a given site.
    pub fn reflected(&self) -> Vec<Offset> {
        self.offsets.iter().map(|o| [-o[0], -o[1]]).collect()
    }

    pub fn check_lattice(&self, lattice: &Lattice) -> Result<()> {
        if lattice.dimension() == 1 && self.offsets.iter().any(|o| o[1] != 0) {
            return Err(Error::InvalidShape(
                "2D neighborhood used on a 1D lattice".into(),
            ));
        }
        Ok(())
    }
}

/// Values written into a neighborhood, aligned with its slot order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LocalConfiguration(pub Vec<Species>);

/// A transition `σ → σ^{x,ω}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Event {
    pub site: usize,
    pub omega: LocalConfiguration,
}

/// Precomputed neighborhood sites for every lattice site.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    k: usize,
    sites: Vec<u32>,
}

impl NeighborTable {
    pub fn new(lattice: &Lattice, shape: &NeighborhoodShape) -> Result<Self> {
        shape.check_lattice(lattice)?;
        let k = shape.size();
        let mut sites = Vec::with_capacity(k * lattice.n_sites());
        for x in 0..lattice.n_sites() {
            sites.extend(shape.offsets().iter().map(|&o| lattice.shift(x, o) as u32));
        }
        Ok(Self { k, sites })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Slot `slot` of the neighborhood of `x`.
    #[inline]
    pub fn get(&self, x: usize, slot: usize) -> usize {
        self.sites[x * self.k + slot] as usize
    }

    #[inline]
    pub fn of(&self, x: usize) -> &[u32] {
        &self.sites[x * self.k..(x + 1) * self.k]
    }
}

/// Sites of the neighborhood of `x`, in shape order.
pub fn neighborhood_sites(
    lattice: &Lattice,
    shape: &NeighborhoodShape,
    x: usize,
) -> Result<Vec<usize>> {
    lattice.check_site(x)?;
    shape.check_lattice(lattice)?;
    Ok(shape
        .offsets()
        .iter()
        .map(|&o| lattice.shift(x, o))
        .collect())
}

/// Current values on the neighborhood of `x`.
pub fn local_configuration(
    sigma: &Configuration,
    lattice: &Lattice,
    shape: &NeighborhoodShape,
    x: usize,
) -> Result<LocalConfiguration> {
    let sites = neighborhood_sites(lattice, shape, x)?;
    Ok(LocalConfiguration(
        sites.iter().map(|&y| sigma.get(y)).collect(),
    ))
}

/// Returns `σ^{x,ω}`.
///
/// Slots where `ω` agrees with the current value are left untouched, so on
/// lattices small enough for a site to occupy two slots the slot that
/// changes the site wins.
pub fn apply_update(
    sigma: &Configuration,
    event: &Event,
    lattice: &Lattice,
    shape: &NeighborhoodShape,
) -> Result<Configuration> {
    if event.omega.0.len() != shape.size() {
        return Err(Error::LengthMismatch {
            expected: shape.size(),
            got: event.omega.0.len(),
        });
    }
    let sites = neighborhood_sites(lattice, shape, event.site)?;
    let mut out = sigma.clone();
    for (&y, &w) in sites.iter().zip(&event.omega.0) {
        if sigma.get(y) != w {
            out.set(y, w);
        }
    }
    Ok(out)
}

/// Spin flip `σ^x` on a binary lattice gas.
pub fn flip(sigma: &Configuration, x: usize, species: &SpeciesSet) -> Result<Configuration> {
    if !species.is_binary() {
        return Err(Error::NonBinarySpecies);
    }
    if x >= sigma.len() {
        return Err(Error::InvalidSite {
            site: x,
            n: sigma.len(),
        });
    }
    let mut out = sigma.clone();
    out.set(x, 1 - sigma.get(x));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_d_neighborhood_wraps() {
        let lat = Lattice::one_d(5).unwrap();
        let shape = NeighborhoodShape::nearest_neighbor_1d();
        assert_eq!(neighborhood_sites(&lat, &shape, 0).unwrap(), vec![0, 4, 1]);
    }

    #[test]
    fn von_neumann_order() {
        let lat = Lattice::two_d(4, 4).unwrap();
        let shape = NeighborhoodShape::von_neumann_2d();
        let x = lat.site_at([1, 1]);
        let got = neighborhood_sites(&lat, &shape, x).unwrap();
        let expect = vec![
            x,
            lat.site_at([1, 2]),
            lat.site_at([2, 1]),
            lat.site_at([1, 0]),
            lat.site_at([0, 1]),
        ];
        assert_eq!(got, expect);
        assert_eq!(shape.axis_slots(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn evans_shape_has_17_distinct_sites() {
        let lat = Lattice::two_d(5, 5).unwrap();
        let shape = NeighborhoodShape::evans_2d();
        let sites = neighborhood_sites(&lat, &shape, 0).unwrap();
        assert_eq!(sites.len(), 17);
        let mut dedup = sites.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), 17);
        assert_eq!(shape.axis_slots(), vec![1, 3, 5, 7]);
        assert_eq!(shape.diameter(), 4);
        // D_3: x_2, x_4, x_11, x_12 are the unit neighbors of x_3.
        let o = shape.offsets();
        for j in [1usize, 3, 10, 11] {
            let d = (o[j][0] - o[2][0]).abs() + (o[j][1] - o[2][1]).abs();
            assert_eq!(d, 1, "slot {} not adjacent to x_3", j + 1);
        }
    }

    #[test]
    fn invalid_site_rejected() {
        let lat = Lattice::one_d(3).unwrap();
        let shape = NeighborhoodShape::nearest_neighbor_1d();
        assert!(matches!(
            neighborhood_sites(&lat, &shape, 3),
            Err(Error::InvalidSite { site: 3, n: 3 })
        ));
        assert!(NeighborhoodShape::new(vec![[1, 0], [0, 0]]).is_err());
        assert!(NeighborhoodShape::new(vec![[0, 0], [1, 0], [1, 0]]).is_err());
        assert!(Lattice::new(&[]).is_err());
        assert!(Lattice::new(&[2, 0]).is_err());
    }

    #[test]
    fn apply_update_examples() {
        let lat = Lattice::one_d(3).unwrap();
        let single = NeighborhoodShape::single_site();
        let sigma = Configuration::from_vec(vec![0, 1, 0]);
        let e = Event {
            site: 1,
            omega: LocalConfiguration(vec![0]),
        };
        assert_eq!(
            apply_update(&sigma, &e, &lat, &single).unwrap().as_slice(),
            &[0, 0, 0]
        );

        let lat4 = Lattice::one_d(4).unwrap();
        let pair = NeighborhoodShape::new(vec![[0, 0], [1, 0]]).unwrap();
        let sigma = Configuration::from_vec(vec![1, 0, 0, 0]);
        let hop = Event {
            site: 0,
            omega: LocalConfiguration(vec![0, 1]),
        };
        assert_eq!(
            apply_update(&sigma, &hop, &lat4, &pair).unwrap().as_slice(),
            &[0, 1, 0, 0]
        );

        let same = Event {
            site: 0,
            omega: local_configuration(&sigma, &lat4, &pair, 0).unwrap(),
        };
        assert_eq!(apply_update(&sigma, &same, &lat4, &pair).unwrap(), sigma);

        let bad = Event {
            site: 0,
            omega: LocalConfiguration(vec![0]),
        };
        assert!(matches!(
            apply_update(&sigma, &bad, &lat4, &pair),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_two_site_lattice_hop() {
        // left and right neighbor coincide; the slot that changes wins
        let lat = Lattice::one_d(2).unwrap();
        let shape = NeighborhoodShape::nearest_neighbor_1d();
        let sigma = Configuration::from_vec(vec![1, 0]);
        let hop_left = Event {
            site: 0,
            omega: LocalConfiguration(vec![0, 1, 0]),
        };
        assert_eq!(
            apply_update(&sigma, &hop_left, &lat, &shape)
                .unwrap()
                .as_slice(),
            &[0, 1]
        );
    }

    #[test]
    fn flip_examples() {
        let bin = SpeciesSet::binary();
        let s = Configuration::from_vec(vec![0, 0]);
        assert_eq!(flip(&s, 0, &bin).unwrap().as_slice(), &[1, 0]);
        let s = Configuration::from_vec(vec![1, 1]);
        assert_eq!(flip(&s, 1, &bin).unwrap().as_slice(), &[1, 0]);
        assert_eq!(
            flip(&s, 0, &SpeciesSet::co_oxidation()),
            Err(Error::NonBinarySpecies)
        );
    }

    #[test]
    fn species_set_rejects_duplicates() {
        assert!(SpeciesSet::new(vec![0, 1, 1], Some(0)).is_err());
        assert!(SpeciesSet::new(vec![0, 1], Some(2)).is_err());
        let c = Configuration::from_vec(vec![0, 2]);
        assert_eq!(
            c.validate(&SpeciesSet::binary()),
            Err(Error::InvalidSpecies(2))
        );
    }

    fn lattice_and_shape() -> impl Strategy<Value = (Lattice, NeighborhoodShape)> {
        prop_oneof![
            (3usize..12).prop_map(|n| (
                Lattice::one_d(n).unwrap(),
                NeighborhoodShape::nearest_neighbor_1d()
            )),
            (3usize..7, 3usize..7).prop_map(|(r, c)| (
                Lattice::two_d(r, c).unwrap(),
                NeighborhoodShape::von_neumann_2d()
            )),
            (5usize..8, 5usize..8)
                .prop_map(|(r, c)| (Lattice::two_d(r, c).unwrap(), NeighborhoodShape::evans_2d())),
        ]
    }

    proptest! {
        #[test]
        fn update_touches_only_neighborhood(
            (lat, shape) in lattice_and_shape(),
            seed in any::<u64>(),
        ) {
            let n = lat.n_sites();
            let k = shape.size();
            let mut s = seed;
            let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 33) as usize };
            let sigma = Configuration::from_vec((0..n).map(|_| (next() % 3) as i8 - 1).collect());
            let x = next() % n;
            let omega = LocalConfiguration((0..k).map(|_| (next() % 3) as i8 - 1).collect());
            let out = apply_update(&sigma, &Event { site: x, omega: omega.clone() }, &lat, &shape).unwrap();
            let hood = neighborhood_sites(&lat, &shape, x).unwrap();
            for y in 0..n {
                if !hood.contains(&y) {
                    prop_assert_eq!(out.get(y), sigma.get(y));
                }
            }
            for (slot, &y) in hood.iter().enumerate() {
                prop_assert_eq!(out.get(y), omega.0[slot]);
            }
        }

        #[test]
        fn neighborhoods_distinct_when_lattice_exceeds_diameter(
            (lat, shape) in lattice_and_shape(),
            x in 0usize..1000,
        ) {
            let x = x % lat.n_sites();
            if lat.sides().iter().all(|&s| s > shape.diameter()) {
                let mut sites = neighborhood_sites(&lat, &shape, x).unwrap();
                prop_assert_eq!(sites[0], x);
                sites.sort_unstable();
                sites.dedup();
                prop_assert_eq!(sites.len(), shape.size());
            }
        }

        #[test]
        fn flip_is_involution(bits in proptest::collection::vec(0i8..2, 1..40), x in 0usize..40) {
            let sigma = Configuration::from_vec(bits);
            let x = x % sigma.len();
            let bin = SpeciesSet::binary();
            let twice = flip(&flip(&sigma, x, &bin).unwrap(), x, &bin).unwrap();
            prop_assert_eq!(twice, sigma);
        }

        #[test]
        fn coordinates_round_trip(r in 1usize..9, c in 1usize..9, x in 0usize..81) {
            let lat = Lattice::two_d(r, c).unwrap();
            let x = x % lat.n_sites();
            let [a, b] = lat.coords(x);
            prop_assert_eq!(lat.site_at([a as i64, b as i64]), x);
            prop_assert_eq!(lat.shift(lat.shift(x, [2, -3]), [-2, 3]), x);
        }
    }
}
