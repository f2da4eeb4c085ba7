use rand::Rng;

/// Fully connected network with rectifier hidden layers and a linear
/// output, parameters stored flat: per layer the row-major
/// `outputs × inputs` weight matrix followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Activations of one forward pass, kept for backpropagation.
pub struct ForwardCache {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> f64 {
        self.acts.last().expect("non-empty")[0]
    }
}

impl Network {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && *sizes.last().unwrap() == 1, "scalar output expected");
        let n = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Network {
            sizes: sizes.to_vec(),
            params: vec![0.0; n],
        }
    }

    /// Uniform fan-in initialization `±sqrt(6 / inputs)`, zero biases.
    pub fn he_uniform(sizes: &[usize], rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(sizes);
        for l in 0..net.num_layers() {
            let (inputs, outputs) = (net.sizes[l], net.sizes[l + 1]);
            let limit = (6.0 / inputs as f64).sqrt();
            let w = net.weight_offset(l);
            for p in &mut net.params[w..w + inputs * outputs] {
                *p = rng.gen_range(-limit..limit);
            }
        }
        net
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn weight_offset(&self, layer: usize) -> usize {
        self.sizes[..layer + 1]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn bias_offset(&self, layer: usize) -> usize {
        self.weight_offset(layer) + self.sizes[layer] * self.sizes[layer + 1]
    }

    pub fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        assert_eq!(x.len(), self.sizes[0], "input length");
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        for l in 0..self.num_layers() {
            let (inputs, outputs) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[self.weight_offset(l)..];
            let b = &self.params[self.bias_offset(l)..];
            let input = &acts[l];
            let last = l + 1 == self.num_layers();
            let out: Vec<f64> = (0..outputs)
                .map(|o| {
                    let row = &w[o * inputs..(o + 1) * inputs];
                    let z = b[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                    if last {
                        z
                    } else {
                        z.max(0.0)
                    }
                })
                .collect();
            acts.push(out);
        }
        ForwardCache { acts }
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.forward_cached(x).output()
    }

    /// Adds `dout · ∂output/∂params` to `grad`.
    pub fn backward(&self, cache: &ForwardCache, dout: f64, grad: &mut [f64]) {
        let mut delta = vec![dout];
        for l in (0..self.num_layers()).rev() {
            let (inputs, outputs) = (self.sizes[l], self.sizes[l + 1]);
            let wo = self.weight_offset(l);
            let bo = self.bias_offset(l);
            let input = &cache.acts[l];
            for o in 0..outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                grad[bo + o] += d;
                let row = &mut grad[wo + o * inputs..wo + (o + 1) * inputs];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if l == 0 {
                break;
            }
            // back through the weights, then the rectifier of layer l - 1
            let mut prev = vec![0.0; inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &self.params[wo + o * inputs..wo + (o + 1) * inputs];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            for (p, a) in prev.iter_mut().zip(&cache.acts[l]) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }

    /// Smallest absolute hidden pre-activation over one forward pass; used
    /// to keep finite-difference checks away from rectifier kinks.
    pub fn min_hidden_margin(&self, x: &[f64]) -> f64 {
        let mut margin = f64::INFINITY;
        let mut input = x.to_vec();
        for l in 0..self.num_layers() - 1 {
            let (inputs, outputs) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[self.weight_offset(l)..];
            let b = &self.params[self.bias_offset(l)..];
            let z: Vec<f64> = (0..outputs)
                .map(|o| b[o] + w[o * inputs..(o + 1) * inputs].iter().zip(&input).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
            input = z.into_iter().map(|v| v.max(0.0)).collect();
        }
        margin
    }
}
