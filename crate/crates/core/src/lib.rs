pub mod constitutive;
pub mod femspace;
pub mod forms;
pub mod mesh;
pub mod quadrature;
pub mod scalar;
pub mod slab;
pub mod sparse;
pub mod timebasis;
pub mod solver;

/// Scalar type of the finite element and solver stack.
pub type Scalar = f64;
pub type Params = constitutive::ModelParams<Scalar>;
pub type Variant = constitutive::TangentVariant<Scalar>;
