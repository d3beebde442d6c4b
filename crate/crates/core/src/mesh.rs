//! Structured quadrilateral meshes of rectangles, their faces, boundary tags,
//! and the uniform refinement hierarchy used by multigrid.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("cell counts must be positive, got {nx}x{ny}")]
    EmptyMesh { nx: usize, ny: usize },
    #[error("degenerate extents [{x0}, {x1}] x [{y0}, {y1}]")]
    DegenerateExtents { x0: f64, x1: f64, y0: f64, y1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

/// Side of a cell, in the order left, right, bottom, top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
            Side::Bottom => 2,
            Side::Top => 3,
        }
    }

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
            Side::Bottom => Side::Top,
            Side::Top => Side::Bottom,
        }
    }

    /// Maps a face parameter `s` in `[0, 1]` to reference cell coordinates.
    pub fn reference_point(self, s: f64) -> [f64; 2] {
        match self {
            Side::Left => [0.0, s],
            Side::Right => [1.0, s],
            Side::Bottom => [s, 0.0],
            Side::Top => [s, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceKind {
    /// `minus` is the lower-index cell; the normal points from it into `plus`.
    Interior { minus: usize, plus: usize },
    Boundary { cell: usize, tag: BoundaryTag },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub kind: FaceKind,
    /// Side of the first adjacent cell (`minus` or the boundary cell).
    pub side: Side,
    pub normal: [f64; 2],
    pub h: f64,
    pub start: [f64; 2],
    pub end: [f64; 2],
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        matches!(self.kind, FaceKind::Boundary { .. })
    }

    pub fn midpoint(&self) -> [f64; 2] {
        [
            0.5 * (self.start[0] + self.end[0]),
            0.5 * (self.start[1] + self.end[1]),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredQuadMesh {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub level: usize,
    faces: Vec<Face>,
}

impl StructuredQuadMesh {
    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn hx(&self) -> f64 {
        (self.x1 - self.x0) / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y1 - self.y0) / self.ny as f64
    }

    /// Largest cell diameter measured as the longer edge.
    pub fn h(&self) -> f64 {
        self.hx().max(self.hy())
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    /// Lower-left corner of a cell.
    pub fn cell_origin(&self, cell: usize) -> [f64; 2] {
        let (i, j) = self.cell_ij(cell);
        [
            self.x0 + i as f64 * self.hx(),
            self.y0 + j as f64 * self.hy(),
        ]
    }

    pub fn centroid(&self, cell: usize) -> [f64; 2] {
        let o = self.cell_origin(cell);
        [o[0] + 0.5 * self.hx(), o[1] + 0.5 * self.hy()]
    }

    /// Physical point of reference coordinates `xi` in `[0, 1]^2` on a cell.
    pub fn map_point(&self, cell: usize, xi: [f64; 2]) -> [f64; 2] {
        let o = self.cell_origin(cell);
        [o[0] + xi[0] * self.hx(), o[1] + xi[1] * self.hy()]
    }

    /// Cell containing a physical point together with its reference coordinates.
    pub fn locate(&self, x: [f64; 2]) -> (usize, [f64; 2]) {
        let fx = ((x[0] - self.x0) / self.hx()).clamp(0.0, self.nx as f64);
        let fy = ((x[1] - self.y0) / self.hy()).clamp(0.0, self.ny as f64);
        let i = (fx.floor() as usize).min(self.nx - 1);
        let j = (fy.floor() as usize).min(self.ny - 1);
        (self.cell_index(i, j), [fx - i as f64, fy - j as f64])
    }

    /// Neighbor across a side, if any.
    pub fn neighbor(&self, cell: usize, side: Side) -> Option<usize> {
        let (i, j) = self.cell_ij(cell);
        match side {
            Side::Left => (i > 0).then(|| self.cell_index(i - 1, j)),
            Side::Right => (i + 1 < self.nx).then(|| self.cell_index(i + 1, j)),
            Side::Bottom => (j > 0).then(|| self.cell_index(i, j - 1)),
            Side::Top => (j + 1 < self.ny).then(|| self.cell_index(i, j + 1)),
        }
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(|f| !f.is_boundary())
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(|f| f.is_boundary())
    }

    pub fn num_interior_faces(&self) -> usize {
        self.interior_faces().count()
    }

    pub fn num_boundary_faces(&self) -> usize {
        self.boundary_faces().count()
    }

    /// True when every boundary face carries a Dirichlet tag.
    pub fn all_dirichlet(&self) -> bool {
        self.boundary_faces().all(|f| {
            matches!(
                f.kind,
                FaceKind::Boundary {
                    tag: BoundaryTag::Dirichlet,
                    ..
                }
            )
        })
    }

    /// Retags every boundary face with `rule(face)`.
    pub fn boundary_tag_assign<F: Fn(&Face) -> BoundaryTag>(mut self, rule: F) -> Self {
        for face in self.faces.iter_mut() {
            if let FaceKind::Boundary { cell, .. } = face.kind {
                let tag = rule(face);
                face.kind = FaceKind::Boundary { cell, tag };
            }
        }
        self
    }

    /// Boundary faces tagged `tag`.
    pub fn count_tag(&self, tag: BoundaryTag) -> usize {
        self.boundary_faces()
            .filter(|f| matches!(f.kind, FaceKind::Boundary { tag: t, .. } if t == tag))
            .count()
    }

    /// Doubles the cell counts. `children[c]` lists the four children of
    /// coarse cell `c` in lexicographic order.
    pub fn refine(&self) -> (StructuredQuadMesh, Vec<[usize; 4]>) {
        let mut fine = build(
            2 * self.nx,
            2 * self.ny,
            [self.x0, self.y0, self.x1, self.y1],
            self.level + 1,
        );
        // Inherit tags through the parent face geometry.
        let coarse_tags: Vec<(Face, BoundaryTag)> = self
            .boundary_faces()
            .filter_map(|f| match f.kind {
                FaceKind::Boundary { tag, .. } => Some((*f, tag)),
                _ => None,
            })
            .collect();
        for face in fine.faces.iter_mut() {
            if let FaceKind::Boundary { cell, .. } = face.kind {
                let m = face.midpoint();
                let tag = coarse_tags
                    .iter()
                    .find(|(cf, _)| cf.side == face.side && segment_contains(cf, m))
                    .map(|(_, t)| *t)
                    .unwrap_or(BoundaryTag::Dirichlet);
                face.kind = FaceKind::Boundary { cell, tag };
            }
        }
        let children = (0..self.num_cells())
            .map(|c| {
                let (i, j) = self.cell_ij(c);
                [
                    fine.cell_index(2 * i, 2 * j),
                    fine.cell_index(2 * i + 1, 2 * j),
                    fine.cell_index(2 * i, 2 * j + 1),
                    fine.cell_index(2 * i + 1, 2 * j + 1),
                ]
            })
            .collect();
        (fine, children)
    }
}

fn segment_contains(face: &Face, p: [f64; 2]) -> bool {
    let tol = 1e-12 * (1.0 + face.h);
    let (lo_x, hi_x) = (face.start[0].min(face.end[0]), face.start[0].max(face.end[0]));
    let (lo_y, hi_y) = (face.start[1].min(face.end[1]), face.start[1].max(face.end[1]));
    p[0] >= lo_x - tol && p[0] <= hi_x + tol && p[1] >= lo_y - tol && p[1] <= hi_y + tol
}

/// Uniform `nx x ny` mesh of `[x0, x1] x [y0, y1]`, all boundary faces Dirichlet.
pub fn uniform_mesh(
    nx: usize,
    ny: usize,
    extents: [f64; 4],
) -> Result<StructuredQuadMesh, MeshError> {
    let [x0, y0, x1, y1] = extents;
    if nx == 0 || ny == 0 {
        return Err(MeshError::EmptyMesh { nx, ny });
    }
    if !(x1 > x0 && y1 > y0) || !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite())
    {
        return Err(MeshError::DegenerateExtents { x0, x1, y0, y1 });
    }
    Ok(build(nx, ny, extents, 0))
}

pub fn unit_square(n: usize) -> Result<StructuredQuadMesh, MeshError> {
    uniform_mesh(n, n, [0.0, 0.0, 1.0, 1.0])
}

fn build(nx: usize, ny: usize, extents: [f64; 4], level: usize) -> StructuredQuadMesh {
    let [x0, y0, x1, y1] = extents;
    let mut mesh = StructuredQuadMesh {
        nx,
        ny,
        x0,
        y0,
        x1,
        y1,
        level,
        faces: Vec::new(),
    };
    let hx = mesh.hx();
    let hy = mesh.hy();
    let px = |i: usize| x0 + i as f64 * hx;
    let py = |j: usize| y0 + j as f64 * hy;
    let mut faces = Vec::with_capacity(2 * nx * ny + nx + ny);
    // Vertical faces x = px(i).
    for j in 0..ny {
        for i in 0..=nx {
            let start = [px(i), py(j)];
            let end = [px(i), py(j + 1)];
            let face = if i == 0 {
                Face {
                    kind: FaceKind::Boundary {
                        cell: mesh.cell_index(0, j),
                        tag: BoundaryTag::Dirichlet,
                    },
                    side: Side::Left,
                    normal: [-1.0, 0.0],
                    h: hy,
                    start,
                    end,
                }
            } else if i == nx {
                Face {
                    kind: FaceKind::Boundary {
                        cell: mesh.cell_index(nx - 1, j),
                        tag: BoundaryTag::Dirichlet,
                    },
                    side: Side::Right,
                    normal: [1.0, 0.0],
                    h: hy,
                    start,
                    end,
                }
            } else {
                Face {
                    kind: FaceKind::Interior {
                        minus: mesh.cell_index(i - 1, j),
                        plus: mesh.cell_index(i, j),
                    },
                    side: Side::Right,
                    normal: [1.0, 0.0],
                    h: hy,
                    start,
                    end,
                }
            };
            faces.push(face);
        }
    }
    // Horizontal faces y = py(j).
    for j in 0..=ny {
        for i in 0..nx {
            let start = [px(i), py(j)];
            let end = [px(i + 1), py(j)];
            let face = if j == 0 {
                Face {
                    kind: FaceKind::Boundary {
                        cell: mesh.cell_index(i, 0),
                        tag: BoundaryTag::Dirichlet,
                    },
                    side: Side::Bottom,
                    normal: [0.0, -1.0],
                    h: hx,
                    start,
                    end,
                }
            } else if j == ny {
                Face {
                    kind: FaceKind::Boundary {
                        cell: mesh.cell_index(i, ny - 1),
                        tag: BoundaryTag::Dirichlet,
                    },
                    side: Side::Top,
                    normal: [0.0, 1.0],
                    h: hx,
                    start,
                    end,
                }
            } else {
                Face {
                    kind: FaceKind::Interior {
                        minus: mesh.cell_index(i, j - 1),
                        plus: mesh.cell_index(i, j),
                    },
                    side: Side::Top,
                    normal: [0.0, 1.0],
                    h: hx,
                    start,
                    end,
                }
            };
            faces.push(face);
        }
    }
    mesh.faces = faces;
    mesh
}

/// Nested meshes ordered coarsest to finest.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    pub levels: Vec<StructuredQuadMesh>,
    /// `children[l][c]`: children on level `l + 1` of cell `c` on level `l`.
    pub children: Vec<Vec<[usize; 4]>>,
}

impl MeshHierarchy {
    /// Refines `coarse` until `num_levels` meshes exist.
    pub fn new(coarse: StructuredQuadMesh, num_levels: usize) -> Self {
        assert!(num_levels >= 1);
        let mut levels = vec![coarse];
        let mut children = Vec::new();
        while levels.len() < num_levels {
            let (fine, map) = levels.last().unwrap().refine();
            levels.push(fine);
            children.push(map);
        }
        Self { levels, children }
    }

    /// Hierarchy from `coarse_n x coarse_n` up to a finest mesh of `fine_n` cells
    /// per direction on the unit square; `fine_n / coarse_n` must be a power of two.
    pub fn unit_square(coarse_n: usize, fine_n: usize) -> Result<Self, MeshError> {
        let coarse_n = coarse_n.min(fine_n);
        let mut levels = 1;
        let mut n = coarse_n;
        while n < fine_n {
            n *= 2;
            levels += 1;
        }
        if n != fine_n {
            return Err(MeshError::EmptyMesh {
                nx: fine_n,
                ny: coarse_n,
            });
        }
        Ok(Self::new(unit_square(coarse_n)?, levels))
    }

    pub fn finest(&self) -> &StructuredQuadMesh {
        self.levels.last().unwrap()
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Coarse parent of a fine cell on level `l + 1`.
    pub fn parent(&self, l: usize, fine_cell: usize) -> usize {
        let fine = &self.levels[l + 1];
        let (i, j) = fine.cell_ij(fine_cell);
        self.levels[l].cell_index(i / 2, j / 2)
    }
}
