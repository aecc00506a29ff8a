//! Domain geometry: ASCII-mask ingestion and cell/face classification.
//!
//! A scenario describes its domain as a rectangular character mask:
//! `'.'` cells are inside the walkable region, `'#'` cells are wall
//! material and `'E'` cells are exit openings directly adjacent to the
//! region. Everything beyond the mask rectangle counts as wall. Row 0 of
//! the mask is the top row; x grows rightward, y grows upward, and cell
//! `(i, j)` has its center at `((i+0.5)·hx, (j+0.5)·hy)`.
//!
//! The boundary of the inside region decomposes into wall faces, exit
//! faces and corner vertices (doorjambs where wall meets exit, wall
//! corners where two wall runs turn). Two exit runs meeting at a corner
//! with no wall between them are rejected: every corner must touch a
//! wall.

use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Inside,
    OutsideWall,
    OutsideExit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceClass {
    Interior,
    Wall,
    Exit,
}

/// Face direction relative to its owning cell; doubles as the outward
/// normal for boundary faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Direction {
    Left,
    Right,
    Down,
    Up,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Left,
        Direction::Right,
        Direction::Down,
        Direction::Up,
    ];

    /// Unit outward normal ν of a boundary face with this direction.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Direction::Left => [-1.0, 0.0],
            Direction::Right => [1.0, 0.0],
            Direction::Down => [0.0, -1.0],
            Direction::Up => [0.0, 1.0],
        }
    }

    pub fn offset(self) -> (isize, isize) {
        match self {
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
            Direction::Down => (0, -1),
            Direction::Up => (0, 1),
        }
    }

    /// True when the face normal is along x (the face itself is a vertical
    /// segment).
    pub fn is_x_normal(self) -> bool {
        matches!(self, Direction::Left | Direction::Right)
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            Direction::Down => Direction::Up,
            Direction::Up => Direction::Down,
        }
    }

    fn index(self) -> usize {
        match self {
            Direction::Left => 0,
            Direction::Right => 1,
            Direction::Down => 2,
            Direction::Up => 3,
        }
    }
}

/// A face of an INSIDE cell, identified by the cell and the direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Face {
    pub i: usize,
    pub j: usize,
    pub dir: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CornerKind {
    Doorjamb,
    WallCorner,
}

/// A corner vertex of the boundary, in grid-vertex coordinates
/// (`vi ∈ 0..=nx`, `vj ∈ 0..=ny`, physical position `(vi·hx, vj·hy)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CornerVertex {
    pub vi: usize,
    pub vj: usize,
    pub kind: CornerKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySets {
    pub wall_faces: Vec<Face>,
    pub exit_faces: Vec<Face>,
    pub corner_vertices: Vec<CornerVertex>,
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("mask row {row} has length {len}, expected {expected}")]
    RaggedMask {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("invalid mask character {ch:?} at row {row}, column {col}")]
    InvalidMaskChar { row: usize, col: usize, ch: char },
    #[error("cell sizes must be strictly positive (hx = {hx}, hy = {hy})")]
    NonPositiveSpacing { hx: f64, hy: f64 },
    #[error("mask contains no inside ('.') cell")]
    EmptyDomain,
    #[error("inside cells do not form a single 4-connected component")]
    DisconnectedDomain,
    #[error("domain has no exit face")]
    NoExit,
    #[error("two exit runs meet at vertex ({vi}, {vj}) with no wall between them")]
    AdjacentExitRuns { vi: usize, vj: usize },
    #[error("exit cell at ({i}, {j}) shares no face with an inside cell")]
    DanglingExitCell { i: usize, j: usize },
}

/// Uniform Cartesian grid with cell and face classification.
///
/// Immutable after construction; fields attach to it by inside ordinal
/// (row-major by `(j, i)`).
#[derive(Debug, Clone)]
pub struct Grid {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    cell_class: Vec<CellClass>,
    inside_ordinal: Vec<u32>,
    inside_cells: Vec<(usize, usize)>,
    // Per inside ordinal, classes for [Left, Right, Down, Up].
    face_class: Vec<[FaceClass; 4]>,
    exit_face_count: usize,
}

const NOT_INSIDE: u32 = u32::MAX;

impl Grid {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn inside_count(&self) -> usize {
        self.inside_cells.len()
    }

    /// Inside cells in ordinal order.
    pub fn inside_cells(&self) -> &[(usize, usize)] {
        &self.inside_cells
    }

    /// Class of cell `(i, j)`; coordinates beyond the mask rectangle are
    /// wall material.
    pub fn cell_class(&self, i: isize, j: isize) -> CellClass {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            CellClass::OutsideWall
        } else {
            self.cell_class[j as usize * self.nx + i as usize]
        }
    }

    pub fn is_inside(&self, i: usize, j: usize) -> bool {
        i < self.nx && j < self.ny && self.cell_class[j * self.nx + i] == CellClass::Inside
    }

    /// Inside ordinal of cell `(i, j)`, if it is inside.
    pub fn ordinal(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.nx || j >= self.ny {
            return None;
        }
        match self.inside_ordinal[j * self.nx + i] {
            NOT_INSIDE => None,
            ord => Some(ord as usize),
        }
    }

    /// Face class of the `dir` face of inside cell `(i, j)`.
    pub fn face_class(&self, i: usize, j: usize, dir: Direction) -> FaceClass {
        let ord = self.ordinal(i, j).expect("cell is not INSIDE");
        self.face_class[ord][dir.index()]
    }

    pub fn face_class_ord(&self, ord: usize, dir: Direction) -> FaceClass {
        self.face_class[ord][dir.index()]
    }

    /// Neighbor coordinates in direction `dir`, if within the mask rectangle.
    pub fn neighbor(&self, i: usize, j: usize, dir: Direction) -> Option<(usize, usize)> {
        let (di, dj) = dir.offset();
        let ni = i as isize + di;
        let nj = j as isize + dj;
        if ni < 0 || nj < 0 || ni as usize >= self.nx || nj as usize >= self.ny {
            None
        } else {
            Some((ni as usize, nj as usize))
        }
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [(i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy]
    }

    /// Length of a face with the given direction.
    pub fn face_length(&self, dir: Direction) -> f64 {
        if dir.is_x_normal() {
            self.hy
        } else {
            self.hx
        }
    }

    /// Area |Ω| of the inside region.
    pub fn area(&self) -> f64 {
        self.inside_count() as f64 * self.hx * self.hy
    }

    pub fn exit_face_count(&self) -> usize {
        self.exit_face_count
    }

    /// Boundary faces (wall and exit) in deterministic ordinal order.
    pub fn boundary_faces(&self) -> impl Iterator<Item = (Face, FaceClass)> + '_ {
        self.inside_cells
            .iter()
            .enumerate()
            .flat_map(move |(ord, &(i, j))| {
                Direction::ALL.iter().filter_map(move |&dir| {
                    match self.face_class[ord][dir.index()] {
                        FaceClass::Interior => None,
                        class => Some((Face { i, j, dir }, class)),
                    }
                })
            })
    }

    /// Endpoint vertices of a face, in grid-vertex coordinates.
    pub fn face_vertices(face: &Face) -> [(usize, usize); 2] {
        let Face { i, j, dir } = *face;
        match dir {
            Direction::Left => [(i, j), (i, j + 1)],
            Direction::Right => [(i + 1, j), (i + 1, j + 1)],
            Direction::Down => [(i, j), (i + 1, j)],
            Direction::Up => [(i, j + 1), (i + 1, j + 1)],
        }
    }

    /// Physical segment `[a, b]` of a face.
    pub fn face_segment(&self, face: &Face) -> ([f64; 2], [f64; 2]) {
        let [(v0i, v0j), (v1i, v1j)] = Self::face_vertices(face);
        (
            [v0i as f64 * self.hx, v0j as f64 * self.hy],
            [v1i as f64 * self.hx, v1j as f64 * self.hy],
        )
    }
}

/// Builds and validates a grid from an ASCII mask.
///
/// Mask rows must have equal length and contain only `'.'`, `'#'`, `'E'`.
/// The inside cells must form one non-empty 4-connected component with at
/// least one exit face; every exit cell must touch an inside cell and no
/// two exit runs may meet at a corner without a wall between them.
pub fn build_grid(mask: &str, hx: f64, hy: f64) -> Result<Grid, GridError> {
    if !(hx > 0.0) || !(hy > 0.0) {
        return Err(GridError::NonPositiveSpacing { hx, hy });
    }
    let rows: Vec<&str> = mask
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .filter(|l| !l.is_empty())
        .collect();
    if rows.is_empty() {
        return Err(GridError::EmptyDomain);
    }
    let nx = rows[0].chars().count();
    let ny = rows.len();
    for (r, row) in rows.iter().enumerate() {
        let len = row.chars().count();
        if len != nx {
            return Err(GridError::RaggedMask {
                row: r,
                len,
                expected: nx,
            });
        }
    }

    let mut cell_class = vec![CellClass::OutsideWall; nx * ny];
    for (r, row) in rows.iter().enumerate() {
        let j = ny - 1 - r; // mask row 0 is the top row
        for (c, ch) in row.chars().enumerate() {
            cell_class[j * nx + c] = match ch {
                '.' => CellClass::Inside,
                '#' => CellClass::OutsideWall,
                'E' => CellClass::OutsideExit,
                _ => return Err(GridError::InvalidMaskChar { row: r, col: c, ch }),
            };
        }
    }

    // Inside ordinals, row-major by (j, i).
    let mut inside_ordinal = vec![NOT_INSIDE; nx * ny];
    let mut inside_cells = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if cell_class[j * nx + i] == CellClass::Inside {
                inside_ordinal[j * nx + i] = inside_cells.len() as u32;
                inside_cells.push((i, j));
            }
        }
    }
    if inside_cells.is_empty() {
        return Err(GridError::EmptyDomain);
    }

    // 4-connectivity of the inside region.
    {
        let mut seen = vec![false; inside_cells.len()];
        let mut queue = std::collections::VecDeque::new();
        seen[0] = true;
        queue.push_back(inside_cells[0]);
        let mut count = 1;
        while let Some((i, j)) = queue.pop_front() {
            for dir in Direction::ALL {
                let (di, dj) = dir.offset();
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni < 0 || nj < 0 || ni as usize >= nx || nj as usize >= ny {
                    continue;
                }
                let (ni, nj) = (ni as usize, nj as usize);
                let ord = inside_ordinal[nj * nx + ni];
                if ord != NOT_INSIDE && !seen[ord as usize] {
                    seen[ord as usize] = true;
                    count += 1;
                    queue.push_back((ni, nj));
                }
            }
        }
        if count != inside_cells.len() {
            return Err(GridError::DisconnectedDomain);
        }
    }

    // Exit cells must be flush against the inside region.
    for j in 0..ny {
        for i in 0..nx {
            if cell_class[j * nx + i] != CellClass::OutsideExit {
                continue;
            }
            let touches_inside = Direction::ALL.iter().any(|dir| {
                let (di, dj) = dir.offset();
                let (ni, nj) = (i as isize + di, j as isize + dj);
                ni >= 0
                    && nj >= 0
                    && (ni as usize) < nx
                    && (nj as usize) < ny
                    && cell_class[nj as usize * nx + ni as usize] == CellClass::Inside
            });
            if !touches_inside {
                return Err(GridError::DanglingExitCell { i, j });
            }
        }
    }

    // Face classification.
    let mut face_class = vec![[FaceClass::Interior; 4]; inside_cells.len()];
    let mut exit_face_count = 0;
    for (ord, &(i, j)) in inside_cells.iter().enumerate() {
        for dir in Direction::ALL {
            let (di, dj) = dir.offset();
            let neighbor = {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni < 0 || nj < 0 || ni as usize >= nx || nj as usize >= ny {
                    CellClass::OutsideWall
                } else {
                    cell_class[nj as usize * nx + ni as usize]
                }
            };
            face_class[ord][dir.index()] = match neighbor {
                CellClass::Inside => FaceClass::Interior,
                CellClass::OutsideWall => FaceClass::Wall,
                CellClass::OutsideExit => {
                    exit_face_count += 1;
                    FaceClass::Exit
                }
            };
        }
    }
    if exit_face_count == 0 {
        return Err(GridError::NoExit);
    }

    let grid = Grid {
        nx,
        ny,
        hx,
        hy,
        cell_class,
        inside_ordinal,
        inside_cells,
        face_class,
        exit_face_count,
    };

    // Corner admissibility: a corner vertex touched only by exit faces
    // means two exit runs meet without an intervening wall.
    for (vertex, faces) in vertex_incidence(&grid) {
        if classify_vertex(&faces).is_none() {
            continue;
        }
        if faces.iter().all(|f| f.class == FaceClass::Exit) {
            return Err(GridError::AdjacentExitRuns {
                vi: vertex.0,
                vj: vertex.1,
            });
        }
    }

    Ok(grid)
}

#[derive(Debug, Clone, Copy)]
struct VertexFace {
    x_normal: bool,
    class: FaceClass,
}

/// Boundary faces incident to each grid vertex, keyed deterministically.
fn vertex_incidence(grid: &Grid) -> BTreeMap<(usize, usize), Vec<VertexFace>> {
    let mut map: BTreeMap<(usize, usize), Vec<VertexFace>> = BTreeMap::new();
    for (face, class) in grid.boundary_faces() {
        for v in Grid::face_vertices(&face) {
            map.entry(v).or_default().push(VertexFace {
                x_normal: face.dir.is_x_normal(),
                class,
            });
        }
    }
    map
}

/// A vertex is a corner when its incident boundary faces change direction
/// or class; returns the corner kind, or `None` for straight-run vertices.
fn classify_vertex(faces: &[VertexFace]) -> Option<CornerKind> {
    debug_assert!(faces.len() == 2 || faces.len() == 4, "boundary is closed");
    let same_orientation = faces.iter().all(|f| f.x_normal == faces[0].x_normal);
    let same_class = faces.iter().all(|f| f.class == faces[0].class);
    if same_orientation && same_class {
        return None;
    }
    let any_exit = faces.iter().any(|f| f.class == FaceClass::Exit);
    let any_wall = faces.iter().any(|f| f.class == FaceClass::Wall);
    Some(if any_exit && any_wall {
        CornerKind::Doorjamb
    } else if any_wall {
        CornerKind::WallCorner
    } else {
        // All-exit corners are rejected during construction.
        CornerKind::Doorjamb
    })
}

/// Splits the boundary into wall faces, exit faces and corner vertices.
pub fn boundary_sets(grid: &Grid) -> BoundarySets {
    let mut wall_faces = Vec::new();
    let mut exit_faces = Vec::new();
    for (face, class) in grid.boundary_faces() {
        match class {
            FaceClass::Wall => wall_faces.push(face),
            FaceClass::Exit => exit_faces.push(face),
            FaceClass::Interior => unreachable!(),
        }
    }
    let mut corner_vertices = Vec::new();
    for (&(vi, vj), faces) in vertex_incidence(grid).iter() {
        if let Some(kind) = classify_vertex(faces) {
            corner_vertices.push(CornerVertex { vi, vj, kind });
        }
    }
    BoundarySets {
        wall_faces,
        exit_faces,
        corner_vertices,
    }
}
