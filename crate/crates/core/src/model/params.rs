//! Parameter registry: every tensor belongs to exactly one network, is
//! initialized from a name-derived stream, and can be bound onto a tape as
//! a trainable or frozen leaf.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use stedit_tensor::rng::fnv1a;
use stedit_tensor::{Rng, Scalar, Tape, Tensor, VarId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Network {
    Encoder,
    Recognizer,
    Generator,
    Discriminator,
}

impl Network {
    pub const ALL: [Network; 4] = [
        Network::Encoder,
        Network::Recognizer,
        Network::Generator,
        Network::Discriminator,
    ];

    pub fn archive_name(self) -> &'static str {
        match self {
            Network::Encoder => "E.bin",
            Network::Recognizer => "R.bin",
            Network::Generator => "G.bin",
            Network::Discriminator => "D.bin",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Init {
    Zeros,
    Ones,
    Normal(f64),
    /// Normal with std sqrt(2 / fan_in), the rectifier-friendly scale.
    HeNormal { fan_in: usize },
    /// Uniform in +-(1/sqrt(fan_in)).
    UniformFan(usize),
    /// LSTM gate bias: zeros with the forget-gate block set to one.
    LstmBias { hidden: usize },
}

#[derive(Clone, Debug)]
pub struct ParamDef {
    pub name: String,
    pub net: Network,
    pub shape: Vec<usize>,
}

/// Networks receive their parameters through this sink, so the same
/// definition code yields the registry (collect mode) and tape leaves
/// (bind mode).
pub trait ParamSink<S: Scalar> {
    fn param(&mut self, name: &str, net: Network, shape: &[usize], init: Init) -> VarId;
}

#[derive(Default)]
pub struct DefCollector {
    pub defs: Vec<ParamDef>,
    counter: usize,
}

impl<S: Scalar> ParamSink<S> for DefCollector {
    fn param(&mut self, name: &str, net: Network, shape: &[usize], _init: Init) -> VarId {
        self.defs.push(ParamDef {
            name: name.to_string(),
            net,
            shape: shape.to_vec(),
        });
        self.counter += 1;
        VarId(usize::MAX - self.counter)
    }
}

fn init_tensor<S: Scalar>(name: &str, shape: &[usize], init: Init, seed: u64) -> Tensor<S> {
    let mut rng = Rng::stream_tagged(seed, "init", &[fnv1a(name.as_bytes())]);
    let n: usize = shape.iter().product();
    let data: Vec<S> = match init {
        Init::Zeros => vec![S::ZERO; n],
        Init::Ones => vec![S::ONE; n],
        Init::Normal(std) => (0..n)
            .map(|_| S::from_f64(rng.normal() * std))
            .collect(),
        Init::HeNormal { fan_in } => {
            let std = (2.0 / fan_in.max(1) as f64).sqrt();
            (0..n).map(|_| S::from_f64(rng.normal() * std)).collect()
        }
        Init::UniformFan(fan) => {
            let a = 1.0 / (fan.max(1) as f64).sqrt();
            (0..n).map(|_| S::from_f64(rng.range_f64(-a, a))).collect()
        }
        Init::LstmBias { hidden } => {
            let mut v = vec![S::ZERO; n];
            for x in v.iter_mut().take(2 * hidden).skip(hidden) {
                *x = S::ONE;
            }
            v
        }
    };
    Tensor::new(shape.to_vec(), data)
}

/// All model parameters, keyed by name, with per-network tags.
#[derive(Clone)]
pub struct ParamStore<S> {
    pub defs: Vec<ParamDef>,
    pub values: Vec<Tensor<S>>,
    index: BTreeMap<String, usize>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn init(defs: Vec<ParamDef>, inits: &BTreeMap<String, Init>, seed: u64) -> Self {
        let values = defs
            .iter()
            .map(|d| init_tensor::<S>(&d.name, &d.shape, inits[&d.name], seed))
            .collect();
        let index = defs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.name.clone(), i))
            .collect();
        Self {
            defs,
            values,
            index,
        }
    }

    pub fn idx(&self, name: &str) -> usize {
        *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn value(&self, name: &str) -> &Tensor<S> {
        &self.values[self.idx(name)]
    }

    pub fn value_mut(&mut self, name: &str) -> &mut Tensor<S> {
        let i = self.idx(name);
        &mut self.values[i]
    }

    pub fn total_params(&self) -> usize {
        self.values.iter().map(|v| v.numel()).sum()
    }

    pub fn count_for(&self, net: Network) -> usize {
        self.defs
            .iter()
            .zip(&self.values)
            .filter(|(d, _)| d.net == net)
            .map(|(_, v)| v.numel())
            .sum()
    }

    pub fn names_for(&self, net: Network) -> Vec<String> {
        self.defs
            .iter()
            .filter(|d| d.net == net)
            .map(|d| d.name.clone())
            .collect()
    }

    /// FNV digest over shapes and raw little-endian f64 images of every
    /// value, in registry order.
    pub fn digest(&self) -> String {
        let mut bytes = Vec::new();
        for (d, v) in self.defs.iter().zip(&self.values) {
            bytes.extend_from_slice(d.name.as_bytes());
            for &s in v.shape() {
                bytes.extend_from_slice(&(s as u64).to_le_bytes());
            }
            for x in v.data() {
                bytes.extend_from_slice(&x.to_f64().to_le_bytes());
            }
        }
        format!("{:016x}", fnv1a(&bytes))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.all_finite())
    }
}

impl ParamStore<f32> {
    pub fn to_f64(&self) -> ParamStore<f64> {
        ParamStore {
            defs: self.defs.clone(),
            values: self
                .values
                .iter()
                .map(|t| Tensor::new(t.shape().to_vec(), t.data().iter().map(|&v| v as f64).collect()))
                .collect(),
            index: self.index.clone(),
        }
    }
}

/// Which networks get trainable leaves when binding.
#[derive(Clone, Copy, Debug)]
pub struct Trainable {
    pub enc: bool,
    pub rec: bool,
    pub gen: bool,
    pub disc: bool,
}

impl Trainable {
    pub const NONE: Trainable = Trainable {
        enc: false,
        rec: false,
        gen: false,
        disc: false,
    };
    pub const EGR: Trainable = Trainable {
        enc: true,
        rec: true,
        gen: true,
        disc: false,
    };
    pub const DISC: Trainable = Trainable {
        enc: false,
        rec: false,
        gen: false,
        disc: true,
    };
    pub const ALL: Trainable = Trainable {
        enc: true,
        rec: true,
        gen: true,
        disc: true,
    };

    fn covers(&self, net: Network) -> bool {
        match net {
            Network::Encoder => self.enc,
            Network::Recognizer => self.rec,
            Network::Generator => self.gen,
            Network::Discriminator => self.disc,
        }
    }
}

/// Binds store values as tape leaves, recording name -> leaf id.
pub struct Binder<'a, S: Scalar> {
    pub tape: &'a mut Tape<S>,
    pub store: &'a ParamStore<S>,
    pub trainable: Trainable,
    pub ids: BTreeMap<String, VarId>,
}

impl<'a, S: Scalar> Binder<'a, S> {
    pub fn new(tape: &'a mut Tape<S>, store: &'a ParamStore<S>, trainable: Trainable) -> Self {
        Self {
            tape,
            store,
            trainable,
            ids: BTreeMap::new(),
        }
    }
}

impl<S: Scalar> ParamSink<S> for Binder<'_, S> {
    fn param(&mut self, name: &str, net: Network, shape: &[usize], _init: Init) -> VarId {
        let value = self.store.value(name);
        assert_eq!(value.shape(), shape, "shape drift for {name}");
        let id = self.tape.leaf(value.clone(), self.trainable.covers(net));
        self.ids.insert(name.to_string(), id);
        id
    }
}

/// Records the Init chosen for every def; built alongside the registry.
#[derive(Default)]
pub struct InitCollector {
    pub defs: Vec<ParamDef>,
    pub inits: BTreeMap<String, Init>,
    counter: usize,
}

impl<S: Scalar> ParamSink<S> for InitCollector {
    fn param(&mut self, name: &str, net: Network, shape: &[usize], init: Init) -> VarId {
        self.defs.push(ParamDef {
            name: name.to_string(),
            net,
            shape: shape.to_vec(),
        });
        self.inits.insert(name.to_string(), init);
        self.counter += 1;
        VarId(usize::MAX - self.counter)
    }
}
