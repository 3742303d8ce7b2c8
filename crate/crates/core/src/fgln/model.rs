use crate::ensembles::Gate;
use crate::error::DynamicsError;
use crate::linalg::Matrix;

/// Fixed-gates linear network: trainable weights `W_1..W_L` interleaved
/// with immutable diagonal 0/1 gates `D_1..D_{L-1}` (with the convention
/// `D_0 = D_L = I`). The end-to-end map is
/// `J = W_L D_{L-1} W_{L-1} ... D_1 W_1`.
#[derive(Debug, Clone)]
pub struct FglnModel {
    weights: Vec<Matrix>,
    gates: Vec<Gate>,
}

impl FglnModel {
    pub fn new(weights: Vec<Matrix>, gates: Vec<Gate>) -> Result<Self, DynamicsError> {
        if weights.is_empty() {
            return Err(DynamicsError::InvalidConfig(
                "depth must be at least 1".into(),
            ));
        }
        if gates.len() + 1 != weights.len() {
            return Err(DynamicsError::InvalidConfig(format!(
                "expected {} gates for depth {}, got {}",
                weights.len() - 1,
                weights.len(),
                gates.len()
            )));
        }
        for l in 0..weights.len() - 1 {
            if weights[l + 1].cols() != weights[l].rows() {
                return Err(DynamicsError::InvalidConfig(format!(
                    "weight {} output dim {} does not feed weight {} input dim {}",
                    l + 1,
                    weights[l].rows(),
                    l + 2,
                    weights[l + 1].cols()
                )));
            }
            if gates[l].dim() != weights[l].rows() {
                return Err(DynamicsError::InvalidConfig(format!(
                    "gate {} has dimension {}, expected {}",
                    l + 1,
                    gates[l].dim(),
                    weights[l].rows()
                )));
            }
        }
        Ok(Self { weights, gates })
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().unwrap().rows()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    /// Overwrites a single weight entry; finite-difference probes use this.
    pub fn set_weight_entry(&mut self, layer: usize, row: usize, col: usize, value: f64) {
        self.weights[layer][(row, col)] = value;
    }

    /// Masked layer `M_l = D_l W_l D_{l-1}`, 1-based.
    pub fn masked_layer(&self, l: usize) -> Matrix {
        assert!(l >= 1 && l <= self.depth());
        let mut m = self.weights[l - 1].clone();
        if l < self.depth() {
            m = self.gates[l - 1].apply_left(&m);
        }
        if l > 1 {
            m = self.gates[l - 2].apply_right(&m);
        }
        m
    }

    pub fn masked_layers(&self) -> Vec<Matrix> {
        (1..=self.depth()).map(|l| self.masked_layer(l)).collect()
    }

    /// End-to-end map `J`.
    pub fn end_to_end(&self) -> Matrix {
        let mut j = self.weights[0].clone();
        for l in 1..self.depth() {
            j = self.weights[l].matmul(&self.gates[l - 1].apply_left(&j));
        }
        j
    }

    /// Suffix and prefix partial products around layer `l`:
    /// `A_l = W_L D_{L-1} ... W_{l+1} D_l` and `B_l = D_{l-1} W_{l-1} ... D_1 W_1`,
    /// so that `J = A_l W_l B_l` (empty products are the identity).
    pub fn partial_products(&self, l: usize) -> Result<(Matrix, Matrix), DynamicsError> {
        let depth = self.depth();
        if l == 0 || l > depth {
            return Err(DynamicsError::InvalidConfig(format!(
                "layer index {l} out of range 1..={depth}"
            )));
        }
        let mut b = Matrix::identity(self.weights[l - 1].cols());
        for k in 1..l {
            b = self.gates[k - 1].apply_left(&self.weights[k - 1].matmul(&b));
        }
        let mut a = Matrix::identity(self.weights[l - 1].rows());
        if l < depth {
            a = self.gates[l - 1].matrix();
            for k in l + 1..=depth {
                a = if k < depth {
                    self.gates[k - 1]
                        .apply_left(&self.weights[k - 1])
                        .matmul(&a)
                } else {
                    self.weights[k - 1].matmul(&a)
                };
            }
        }
        Ok((a, b))
    }

    /// Per-layer loss gradients from the end-to-end gradient:
    /// `grad_{W_l} = A_l^T grad_J B_l^T`.
    pub fn grad_weights(&self, grad_j: &Matrix) -> Result<Vec<Matrix>, DynamicsError> {
        if grad_j.rows() != self.output_dim() || grad_j.cols() != self.input_dim() {
            return Err(DynamicsError::InvalidConfig(format!(
                "gradient shape {}x{} does not match end-to-end map {}x{}",
                grad_j.rows(),
                grad_j.cols(),
                self.output_dim(),
                self.input_dim()
            )));
        }
        let depth = self.depth();
        // Prefix products B_l, built incrementally.
        let mut prefixes = Vec::with_capacity(depth);
        let mut b = Matrix::identity(self.input_dim());
        prefixes.push(b.clone());
        for l in 1..depth {
            b = self.gates[l - 1].apply_left(&self.weights[l - 1].matmul(&b));
            prefixes.push(b.clone());
        }
        // Suffix products A_l, built from the top.
        let mut suffixes = vec![Matrix::identity(self.output_dim()); depth];
        for l in (1..depth).rev() {
            let masked_right = self.gates[l - 1].apply_right(&self.weights[l]);
            suffixes[l - 1] = if l == depth - 1 {
                masked_right
            } else {
                suffixes[l].matmul(&masked_right)
            };
        }
        let grads = (0..depth)
            .map(|l| {
                suffixes[l]
                    .transpose()
                    .matmul(grad_j)
                    .matmul(&prefixes[l].transpose())
            })
            .collect();
        Ok(grads)
    }

    /// `max_l || M_{l+1}^T M_{l+1} - M_l M_l^T ||_F`: zero exactly when the
    /// balancing hypothesis holds.
    pub fn balancing_drift(&self) -> f64 {
        let layers = self.masked_layers();
        let mut worst = 0.0f64;
        for l in 0..layers.len().saturating_sub(1) {
            let lhs = layers[l + 1].transpose().matmul(&layers[l + 1]);
            let rhs = layers[l].matmul(&layers[l].transpose());
            worst = worst.max(lhs.sub(&rhs).frobenius_norm());
        }
        worst
    }
}
