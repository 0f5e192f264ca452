//! Metasurface lattice geometry.
//!
//! Maps meta-atom linear indices onto the square planar lattice of each
//! metasurface layer and computes every distance the propagation model needs:
//! within a layer, between adjacent layers, and from the antenna arrays to
//! the closest layer. Indices are 1-based throughout, matching the row-major
//! lattice numbering; any 0-based storage is an implementation detail that
//! must not leak into the formulas.

use crate::error::{Result, SimError};

/// Position of a meta-atom on its layer's square lattice (1-based).
///
/// `row` runs along the vertical (z) axis, `col` along the horizontal (x)
/// axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeIndex {
    pub row: usize,
    pub col: usize,
}

/// Which side of the link a surface or antenna array belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Tx,
    Rx,
}

/// One stack of identical metasurface layers (the TX-SIM or the RX-SIM).
///
/// All lengths are in meters, areas in square meters.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceLayout {
    /// Number of stacked metasurface layers (L or K).
    pub layers: usize,
    /// Meta-atoms per layer (M or N); must be a perfect square.
    pub atoms: usize,
    /// Element spacing between adjacent meta-atoms on one layer.
    pub spacing: f64,
    /// Total thickness of the stack (D); the inter-layer gap is `thickness / layers`.
    pub thickness: f64,
    /// Area of one meta-atom; defaults to `spacing²` (full lattice-cell coverage).
    pub atom_area: f64,
}

impl SurfaceLayout {
    /// Builds a layout with the default full-cell atom area `spacing²`.
    pub fn new(layers: usize, atoms: usize, spacing: f64, thickness: f64) -> Result<Self> {
        Self::with_area(layers, atoms, spacing, thickness, spacing * spacing)
    }

    /// Builds a layout with an explicit meta-atom area.
    pub fn with_area(
        layers: usize,
        atoms: usize,
        spacing: f64,
        thickness: f64,
        atom_area: f64,
    ) -> Result<Self> {
        if layers < 1 {
            return Err(SimError::domain("layer count must be at least 1"));
        }
        let side = atoms.isqrt();
        if atoms == 0 || side * side != atoms {
            return Err(SimError::domain(format!(
                "atom count {atoms} is not a positive perfect square"
            )));
        }
        if !(spacing > 0.0) || !(thickness > 0.0) || !(atom_area > 0.0) {
            return Err(SimError::domain(
                "spacing, thickness and atom area must be strictly positive",
            ));
        }
        Ok(SurfaceLayout { layers, atoms, spacing, thickness, atom_area })
    }

    /// Atoms per lattice row (`√atoms`).
    pub fn row_len(&self) -> usize {
        self.atoms.isqrt()
    }

    /// Spacing between two adjacent layers, derived as `thickness / layers`.
    pub fn layer_gap(&self) -> f64 {
        self.thickness / self.layers as f64
    }
}

/// Full static description of one SIM-aided link.
#[derive(Debug, Clone, PartialEq)]
pub struct SimArchitecture {
    /// Number of data streams, equal to the antenna count on both ends.
    pub streams: usize,
    pub tx: SurfaceLayout,
    pub rx: SurfaceLayout,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
}

impl SimArchitecture {
    pub fn new(
        streams: usize,
        tx: SurfaceLayout,
        rx: SurfaceLayout,
        wavelength: f64,
    ) -> Result<Self> {
        if streams < 1 {
            return Err(SimError::domain("stream count must be at least 1"));
        }
        if tx.atoms < streams || rx.atoms < streams {
            return Err(SimError::domain(format!(
                "atoms per layer (tx {}, rx {}) must be >= stream count {}",
                tx.atoms, rx.atoms, streams
            )));
        }
        if !(wavelength > 0.0) {
            return Err(SimError::domain("wavelength must be strictly positive"));
        }
        Ok(SimArchitecture { streams, tx, rx, wavelength })
    }

    pub fn side(&self, side: Side) -> &SurfaceLayout {
        match side {
            Side::Tx => &self.tx,
            Side::Rx => &self.rx,
        }
    }
}

/// Lattice position of the `m`-th atom (1-based) on a layer with `row_len`
/// atoms per row: row `⌈m / row_len⌉`, column `mod(m − 1, row_len) + 1`.
pub fn atom_index(m: usize, row_len: usize) -> Result<LatticeIndex> {
    check_atom(m, row_len)?;
    Ok(atom_index_unchecked(m, row_len))
}

/// Inverse of [`atom_index`]: recovers the linear index `(row − 1)·row_len + col`.
pub fn linear_index(idx: LatticeIndex, row_len: usize) -> usize {
    (idx.row - 1) * row_len + idx.col
}

/// Distance between atoms `m` and `m_tilde` on the same layer:
/// `spacing · √((Δrow)² + (Δcol)²)`.
pub fn intra_layer_distance(
    m: usize,
    m_tilde: usize,
    spacing: f64,
    row_len: usize,
) -> Result<f64> {
    check_atom(m, row_len)?;
    check_atom(m_tilde, row_len)?;
    Ok(intra_layer_distance_unchecked(m, m_tilde, spacing, row_len))
}

/// Distance from atom `m_tilde` on one layer to atom `m` on the adjacent one:
/// `√(intra² + layer_gap²)`. Minimized (`= layer_gap`) by aligned atoms.
pub fn inter_layer_distance(
    m: usize,
    m_tilde: usize,
    spacing: f64,
    row_len: usize,
    layer_gap: f64,
) -> Result<f64> {
    if !(layer_gap > 0.0) {
        return Err(SimError::domain("layer gap must be strictly positive"));
    }
    let planar = intra_layer_distance(m, m_tilde, spacing, row_len)?;
    Ok(planar.hypot(layer_gap))
}

/// Distance from the `s`-th antenna to atom `m` on the nearest metasurface
/// layer of the chosen side.
///
/// The antennas form a half-wavelength uniform linear array along the lattice
/// row (z) axis, its center aligned with the lattice center, at the layer-gap
/// offset from the surface.
pub fn antenna_to_layer_distance(
    s: usize,
    m: usize,
    arch: &SimArchitecture,
    side: Side,
) -> Result<f64> {
    if s < 1 || s > arch.streams {
        return Err(SimError::domain(format!(
            "antenna index {s} outside 1..={}",
            arch.streams
        )));
    }
    let surf = arch.side(side);
    let row_len = surf.row_len();
    check_atom(m, row_len)?;
    Ok(antenna_to_layer_distance_unchecked(
        s,
        m,
        arch.streams,
        surf,
        arch.wavelength,
    ))
}

fn check_atom(m: usize, row_len: usize) -> Result<()> {
    let atoms = row_len * row_len;
    if m < 1 || m > atoms {
        return Err(SimError::domain(format!(
            "atom index {m} outside 1..={atoms} (row length {row_len})"
        )));
    }
    Ok(())
}

pub(crate) fn atom_index_unchecked(m: usize, row_len: usize) -> LatticeIndex {
    LatticeIndex {
        row: m.div_ceil(row_len),
        col: (m - 1) % row_len + 1,
    }
}

pub(crate) fn intra_layer_distance_unchecked(
    m: usize,
    m_tilde: usize,
    spacing: f64,
    row_len: usize,
) -> f64 {
    let a = atom_index_unchecked(m, row_len);
    let b = atom_index_unchecked(m_tilde, row_len);
    let dz = a.row as f64 - b.row as f64;
    let dx = a.col as f64 - b.col as f64;
    spacing * dz.hypot(dx)
}

pub(crate) fn antenna_to_layer_distance_unchecked(
    s: usize,
    m: usize,
    streams: usize,
    surf: &SurfaceLayout,
    wavelength: f64,
) -> f64 {
    let row_len = surf.row_len();
    let idx = atom_index_unchecked(m, row_len);
    let lattice_center = (row_len as f64 + 1.0) / 2.0;
    let array_center = (streams as f64 + 1.0) / 2.0;
    // Antenna array runs along the z (row) axis; both centers coincide.
    let dz = (idx.row as f64 - lattice_center) * surf.spacing
        - (s as f64 - array_center) * wavelength / 2.0;
    let dx = (idx.col as f64 - lattice_center) * surf.spacing;
    (dz * dz + dx * dx + surf.layer_gap() * surf.layer_gap()).sqrt()
}
