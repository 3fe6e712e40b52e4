//! Radial mesh over the particle [0, 1] and the SEI shell [1, 1 + L_S],
//! with uniform Lagrange elements per subdomain and the global DOF layout.
//!
//! Unknown ordering: particle node i carries (c, mu, u) at indices
//! (3i, 3i+1, 3i+2); SEI nodes carry displacement only, appended after the
//! particle block. The interface displacement DOF is shared, so kinematic
//! continuity u_P(1) = u_S(1) holds by construction and traction continuity
//! becomes natural in the summed weak form.

use crate::quadrature::lagrange_nodes;
use crate::{ModelError, Result};

/// Subdomain tag per element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subdomain {
    Particle,
    Sei,
}

/// Uniform 1D mesh with p-th order nodes per element.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub p: usize,
    pub n_elem_p: usize,
    pub n_elem_s: usize,
    pub l_s: f64,
    /// Particle node radii, 0 ..= 1, length n_elem_p * p + 1.
    pub nodes_p: Vec<f64>,
    /// SEI node radii, 1 ..= 1 + l_s, length n_elem_s * p + 1
    /// (empty when n_elem_s = 0).
    pub nodes_s: Vec<f64>,
}

impl Mesh {
    /// Element width in the particle.
    pub fn h_p(&self) -> f64 {
        1.0 / self.n_elem_p as f64
    }

    /// Element width in the SEI.
    pub fn h_s(&self) -> f64 {
        self.l_s / self.n_elem_s as f64
    }

    /// Left endpoint of particle element e.
    pub fn elem_left_p(&self, e: usize) -> f64 {
        e as f64 * self.h_p()
    }

    /// Left endpoint of SEI element e.
    pub fn elem_left_s(&self, e: usize) -> f64 {
        1.0 + e as f64 * self.h_s()
    }
}

/// Global index map; see the module doc for the layout.
#[derive(Clone, Copy, Debug)]
pub struct DofMap {
    pub p: usize,
    pub n_nodes_p: usize,
    /// SEI node count including the shared interface node; 0 without SEI.
    pub n_nodes_s: usize,
}

impl DofMap {
    #[inline]
    pub fn c(&self, node: usize) -> usize {
        debug_assert!(node < self.n_nodes_p);
        3 * node
    }

    #[inline]
    pub fn mu(&self, node: usize) -> usize {
        debug_assert!(node < self.n_nodes_p);
        3 * node + 1
    }

    #[inline]
    pub fn u_p(&self, node: usize) -> usize {
        debug_assert!(node < self.n_nodes_p);
        3 * node + 2
    }

    /// SEI displacement DOF; node 0 aliases the particle interface node.
    #[inline]
    pub fn u_s(&self, node: usize) -> usize {
        debug_assert!(node < self.n_nodes_s);
        if node == 0 {
            self.u_p(self.n_nodes_p - 1)
        } else {
            3 * self.n_nodes_p + node - 1
        }
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.n_nodes_p + self.n_nodes_s.saturating_sub(1)
    }

    /// Half-bandwidth of any residual assembled on this layout: the widest
    /// element couples DOFs 3p + 2 apart (first node's c to last node's u).
    pub fn half_bandwidth(&self) -> usize {
        3 * self.p + 2
    }
}

/// Builds the two-subdomain mesh. `n_elem_s = 0` produces a particle-only
/// configuration (used by the exact-solution checks); `l_s` is ignored then.
pub fn build_mesh(n_elem_p: usize, n_elem_s: usize, l_s: f64, p: usize) -> Result<(Mesh, DofMap)> {
    if n_elem_p == 0 {
        return Err(ModelError::config("mesh.n_elem_p", "need at least one element"));
    }
    if p == 0 {
        return Err(ModelError::config("mesh.p", "polynomial order must be >= 1"));
    }
    if n_elem_s > 0 && !(l_s > 0.0) {
        return Err(ModelError::config("mesh.l_s", "SEI thickness must be positive"));
    }
    let ref_nodes = lagrange_nodes(p);
    let subdomain_nodes = |left: f64, width: f64, n_elem: usize| -> Vec<f64> {
        let mut nodes = Vec::with_capacity(n_elem * p + 1);
        for e in 0..n_elem {
            let a = left + e as f64 * width;
            let start = if e == 0 { 0 } else { 1 };
            for &xi in &ref_nodes[start..] {
                nodes.push(a + 0.5 * (xi + 1.0) * width);
            }
        }
        nodes
    };
    let nodes_p = subdomain_nodes(0.0, 1.0 / n_elem_p as f64, n_elem_p);
    let nodes_s = if n_elem_s > 0 {
        subdomain_nodes(1.0, l_s / n_elem_s as f64, n_elem_s)
    } else {
        Vec::new()
    };
    let dof = DofMap {
        p,
        n_nodes_p: nodes_p.len(),
        n_nodes_s: nodes_s.len(),
    };
    Ok((
        Mesh {
            p,
            n_elem_p,
            n_elem_s,
            l_s: if n_elem_s > 0 { l_s } else { 0.0 },
            nodes_p,
            nodes_s,
        },
        dof,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_linear_elements() {
        let (mesh, dof) = build_mesh(1, 1, 0.1, 1).unwrap();
        assert_eq!(mesh.nodes_p, vec![0.0, 1.0]);
        assert_eq!(mesh.nodes_s, vec![1.0, 1.1]);
        assert_eq!(dof.n_dofs(), 3 * 2 + 1);
        // Shared interface DOF.
        assert_eq!(dof.u_s(0), dof.u_p(1));
        assert_eq!(dof.u_s(1), 6);
    }

    #[test]
    fn node_counts_fourth_order() {
        let (mesh, dof) = build_mesh(10, 10, 0.1, 4).unwrap();
        assert_eq!(mesh.nodes_p.len(), 41);
        assert_eq!(mesh.nodes_s.len(), 41);
        assert_eq!(dof.n_nodes_p, 41);
        assert!((mesh.nodes_p[40] - 1.0).abs() < 1e-15);
        assert!((mesh.nodes_s[0] - 1.0).abs() < 1e-15);
        assert!((mesh.nodes_s[40] - 1.1).abs() < 1e-12);
    }

    #[test]
    fn paper_resolution_dof_count() {
        // 1200 + 120 fourth-order elements give about 15e3 unknowns.
        let (_, dof) = build_mesh(1200, 120, 0.1, 4).unwrap();
        assert_eq!(dof.n_dofs(), 14_883);
        // CI-sized mesh stays near 1.5e3.
        let (_, dof) = build_mesh(120, 12, 0.1, 4).unwrap();
        assert_eq!(dof.n_dofs(), 1_491);
    }

    #[test]
    fn uniform_spacing_per_subdomain() {
        let (mesh, _) = build_mesh(7, 3, 0.1, 3).unwrap();
        let dp: Vec<f64> = mesh.nodes_p.windows(2).map(|w| w[1] - w[0]).collect();
        for d in &dp {
            assert!((d - dp[0]).abs() < 1e-14);
        }
        let ds: Vec<f64> = mesh.nodes_s.windows(2).map(|w| w[1] - w[0]).collect();
        for d in &ds {
            assert!((d - ds[0]).abs() < 1e-14);
        }
        assert!((mesh.h_s() - 0.1 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn particle_only_mesh() {
        let (mesh, dof) = build_mesh(5, 0, 0.1, 2).unwrap();
        assert!(mesh.nodes_s.is_empty());
        assert_eq!(dof.n_dofs(), 3 * 11);
        assert_eq!(mesh.l_s, 0.0);
    }

    #[test]
    fn invalid_configurations_rejected() {
        assert!(build_mesh(0, 1, 0.1, 1).is_err());
        assert!(build_mesh(1, 1, 0.0, 1).is_err());
        assert!(build_mesh(1, 1, 0.1, 0).is_err());
    }

    #[test]
    fn bandwidth_within_connectivity_bound() {
        let (_, dof) = build_mesh(10, 2, 0.1, 4).unwrap();
        assert_eq!(dof.half_bandwidth(), 14);
        assert!(2 * dof.half_bandwidth() + 1 <= 2 * (4 + 1) * 3);
    }
}
