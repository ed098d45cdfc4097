//! One optimizer owner: forward, loss, backward and Adam over mini-batches.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{augment, Triplet};
use crate::losses::{total_loss, LossWeights, PerceptualStack};
use crate::model::{DanModel, ModelConfig};
use crate::optim::{lr_schedule, Adam};
use crate::rng::CounterRng;
use crate::tape::{ParamStore, Tape};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub loss: LossWeights,
    pub crop: usize,
    pub batch: usize,
    pub epochs: usize,
    /// Learning rate before the decay epoch.
    pub lr: f64,
    pub seed: u64,
    /// Every computation here is sequential, so runs are always bitwise
    /// reproducible; the flag is kept for configuration compatibility.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            loss: LossWeights::default(),
            crop: 64,
            batch: 3,
            epochs: 50,
            lr: crate::optim::BASE_LR,
            seed: 0,
            deterministic: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.loss.validate()?;
        if self.crop == 0 || self.batch == 0 {
            return Err(Error::contract("crop and batch must be at least 1"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::contract("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLog {
    pub epoch: usize,
    /// Steps taken since the start of training, counting from 1.
    pub step: u64,
    /// Batch mean of the total loss before the update.
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    pub model: DanModel,
    pub store: ParamStore<f32>,
    pub adam: Adam<f32>,
    pub stack: PerceptualStack<f32>,
    pub steps: u64,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let model = DanModel::init(config.model, config.seed, &mut store)?;
        Ok(Self::with_store(config, model, store))
    }

    /// Continues from existing parameters with a fresh optimizer.
    pub fn resume(config: TrainConfig, store: ParamStore<f32>) -> Result<Self> {
        config.validate()?;
        let model = DanModel::from_store(&store)?;
        if model.config != config.model {
            return Err(Error::contract("stored parameters do not match the configured architecture"));
        }
        Ok(Self::with_store(config, model, store))
    }

    fn with_store(config: TrainConfig, model: DanModel, store: ParamStore<f32>) -> Self {
        let adam = Adam::new(&store, config.lr);
        Trainer {
            config,
            model,
            store,
            adam,
            stack: PerceptualStack::new(),
            steps: 0,
        }
    }

    /// Forward and backward for one triplet; gradients are added to the
    /// store. Returns the total loss.
    pub fn accumulate(&mut self, t: &Triplet) -> Result<f64> {
        let mut tape = Tape::new();
        let prev = tape.input(t.prev.to_unit_tensor(), false)?;
        let next = tape.input(t.next.to_unit_tensor(), false)?;
        let mid = tape.input(t.mid.to_unit_tensor(), false)?;
        let out = self.model.forward(&mut tape, &self.store, prev, next)?;
        let loss = total_loss(&mut tape, out.frame, mid, &self.config.loss, &self.stack)?;
        tape.backward(loss.total, &mut self.store)?;
        Ok(tape.value(loss.total).data()[0] as f64)
    }

    /// One Adam update from the mean gradient over `batch`.
    pub fn step(&mut self, batch: &[Triplet], lr: f64) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::contract("empty batch"));
        }
        self.store.zero_grad();
        let mut total = 0.0;
        for t in batch {
            total += self.accumulate(t)?;
        }
        let mean = total / batch.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Numeric { op: "total_loss" });
        }
        self.store.scale_grads(1.0 / batch.len() as f32);
        self.adam.lr = lr;
        self.adam.step(&mut self.store)?;
        self.steps += 1;
        Ok(mean)
    }

    /// Sample order of an epoch, a function of the seed and epoch only.
    pub fn epoch_order(&self, len: usize, epoch: usize) -> Vec<usize> {
        let mut rng = CounterRng::new(self.config.seed).fork(0x5348_5546 + epoch as u64);
        let mut order: Vec<usize> = (0..len).collect();
        for i in (1..len).rev() {
            order.swap(i, rng.below(i + 1));
        }
        order
    }

    /// One pass over `data` in batches, augmenting every sample. A trailing
    /// partial batch is used as is. Stops early once `max_steps` total steps
    /// have been taken.
    pub fn run_epoch(
        &mut self,
        data: &[Triplet],
        epoch: usize,
        max_steps: Option<u64>,
        mut log: impl FnMut(&StepLog),
    ) -> Result<()> {
        if data.is_empty() {
            return Err(Error::contract("training set is empty"));
        }
        let lr = lr_schedule(self.config.lr, epoch);
        let order = self.epoch_order(data.len(), epoch);
        let aug = CounterRng::new(self.config.seed).fork(0x4155_4730 + epoch as u64).next_u64();
        for (b, chunk) in order.chunks(self.config.batch).enumerate() {
            if max_steps.is_some_and(|m| self.steps >= m) {
                break;
            }
            let batch = chunk
                .iter()
                .enumerate()
                .map(|(i, &k)| {
                    let seed = CounterRng::draw_at(aug, (b * self.config.batch + i) as u64);
                    augment(&data[k], self.config.crop, seed)
                })
                .collect::<Result<Vec<_>>>()?;
            let loss = self.step(&batch, lr)?;
            log(&StepLog {
                epoch,
                step: self.steps,
                loss,
                lr,
            });
        }
        Ok(())
    }
}
