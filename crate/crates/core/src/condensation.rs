//! Static condensation of a subdomain system onto its interface.
//!
//! With dofs split into interface `Γ` and interior `i`:
//!
//! ```text
//! S = K_ΓΓ − K_Γi K_ii⁻¹ K_iΓ
//! b = f_Γ − K_Γi K_ii⁻¹ f_i
//! ```
//!
//! so that the nodal reaction under interface Dirichlet data `u_Γ` is
//! `λ = S u_Γ − b`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::assembly::AssembledSystem;
use crate::error::{CouplingError, Result};

#[derive(Debug, Clone)]
pub struct CondensedOperator {
    pub schur: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Positions (in the parent system) of the interface dofs, in the order
    /// used by `schur` and `rhs`.
    pub interface: Vec<usize>,
    pub interior: Vec<usize>,
    interior_factor: Option<Cholesky<f64, Dyn>>,
    coupling: DMatrix<f64>,
    interior_load: DVector<f64>,
    label: String,
}

impl CondensedOperator {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn interface_size(&self) -> usize {
        self.interface.len()
    }

    pub fn total_size(&self) -> usize {
        self.interface.len() + self.interior.len()
    }

    /// Nodal reaction `λ = S u_Γ − b`.
    pub fn dirichlet_to_neumann(&self, u_interface: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(u_interface)?;
        Ok(&self.schur * u_interface - &self.rhs)
    }

    /// Full dof vector with interior values `K_ii⁻¹(f_i − K_iΓ u_Γ)`.
    pub fn expand_interior(&self, u_interface: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(u_interface)?;
        let mut full = DVector::zeros(self.total_size());
        for (k, &dof) in self.interface.iter().enumerate() {
            full[dof] = u_interface[k];
        }
        if let Some(factor) = &self.interior_factor {
            let ui = factor.solve(&(&self.interior_load - &self.coupling * u_interface));
            for (k, &dof) in self.interior.iter().enumerate() {
                full[dof] = ui[k];
            }
        }
        Ok(full)
    }

    fn check_len(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.interface.len() {
            return Err(CouplingError::invalid(format!(
                "interface vector has length {}, expected {}",
                u.len(),
                self.interface.len()
            )));
        }
        Ok(())
    }
}

/// Condenses `system` onto `interface_dofs` (indices into the system).
pub fn condense(system: &AssembledSystem, interface_dofs: &[usize], label: &str) -> Result<CondensedOperator> {
    let n = system.size();
    let mut is_interface = vec![false; n];
    for &d in interface_dofs {
        if d >= n {
            return Err(CouplingError::invalid(format!("interface dof {d} out of range {n}")));
        }
        if is_interface[d] {
            return Err(CouplingError::invalid(format!("interface dof {d} listed twice")));
        }
        is_interface[d] = true;
    }
    let interior: Vec<usize> = (0..n).filter(|&d| !is_interface[d]).collect();
    let interface = interface_dofs.to_vec();

    let k_gg = system.block(&interface, &interface);
    let f_g = DVector::from_iterator(interface.len(), interface.iter().map(|&d| system.load[d]));
    if interior.is_empty() {
        return Ok(CondensedOperator {
            schur: k_gg,
            rhs: f_g,
            interface,
            interior,
            interior_factor: None,
            coupling: DMatrix::zeros(0, interface_dofs.len()),
            interior_load: DVector::zeros(0),
            label: label.to_string(),
        });
    }
    let k_ii = system.block(&interior, &interior);
    let k_ig = system.block(&interior, &interface);
    let f_i = DVector::from_iterator(interior.len(), interior.iter().map(|&d| system.load[d]));
    let factor = Cholesky::new(k_ii).ok_or_else(|| CouplingError::SingularInterior {
        subdomain: label.to_string(),
    })?;
    let y = factor.solve(&k_ig);
    let mut schur = k_gg - k_ig.transpose() * &y;
    // restore exact symmetry lost to round-off
    let st = schur.transpose();
    schur = (&schur + st) * 0.5;
    let rhs = f_g - y.transpose() * &f_i;
    Ok(CondensedOperator {
        schur,
        rhs,
        interface,
        interior,
        interior_factor: Some(factor),
        coupling: k_ig,
        interior_load: f_i,
        label: label.to_string(),
    })
}

/// Free-function form of [`CondensedOperator::dirichlet_to_neumann`].
pub fn dirichlet_to_neumann(op: &CondensedOperator, u_interface: &DVector<f64>) -> Result<DVector<f64>> {
    op.dirichlet_to_neumann(u_interface)
}

/// Free-function form of [`CondensedOperator::expand_interior`].
pub fn expand_interior(op: &CondensedOperator, u_interface: &DVector<f64>) -> Result<DVector<f64>> {
    op.expand_interior(u_interface)
}
