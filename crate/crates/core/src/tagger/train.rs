use super::{Hyperparams, TaggerModel};
use crate::autodiff::{sgd_step, Graph, Rng, Tape, TensorError};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean training loss per sentence.
    pub mean_loss: f64,
    pub dev_accuracy: Option<f64>,
}

/// Token accuracy of `model` on `corpus`.
pub fn accuracy(model: &TaggerModel, corpus: &Corpus) -> Result<f64> {
    let (mut right, mut total) = (0usize, 0usize);
    for s in corpus.sentences() {
        let pred = model.predict(&s.forms)?;
        right += pred.iter().zip(&s.tags).filter(|(p, g)| p == g).count();
        total += s.len();
    }
    Ok(if total == 0 { 0.0 } else { right as f64 / total as f64 })
}

/// Trains a tagger on `corpus` with plain SGD, one update per sentence, for
/// `hp.epochs` passes over a freshly shuffled sentence order. A non-finite
/// loss or gradient aborts with [`Error::Divergence`].
pub fn train(corpus: &Corpus, hp: &Hyperparams, dev: Option<&Corpus>) -> Result<(TaggerModel, Vec<EpochLog>)> {
    if corpus.is_empty() {
        return Err(crate::corpus::CorpusError::Empty.into());
    }
    let mut rng = Rng::new(hp.seed);
    let mut model = TaggerModel::init(corpus, hp, &mut rng)?;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut logs = Vec::with_capacity(hp.epochs);
    for epoch in 1..=hp.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for &i in &order {
            let s = &corpus.sentences()[i];
            let diverged = || Error::Divergence { epoch, sentence: i };
            let step = {
                let mut tape = Tape::new(&model.store);
                model.sentence_loss(&mut tape, s, Some(&mut rng)).and_then(|loss| {
                    let value = tape.value(&loss).item();
                    Ok((value, tape.backward(loss)?))
                })
            };
            let (value, grads) = match step {
                Ok(v) => v,
                Err(Error::Tensor(TensorError::NonFinite { .. })) => return Err(diverged()),
                Err(e) => return Err(e),
            };
            if !value.is_finite() {
                return Err(diverged());
            }
            match sgd_step(&mut model.store, grads, hp.lr) {
                Ok(()) => {}
                Err(TensorError::NonFinite { .. }) => return Err(diverged()),
                Err(e) => return Err(e.into()),
            }
            total += value;
        }
        let mean_loss = total / corpus.len() as f64;
        let dev_accuracy = match dev {
            Some(d) => Some(accuracy(&model, d)?),
            None => None,
        };
        match dev_accuracy {
            Some(acc) => log::info!("epoch {epoch}: loss {mean_loss:.4}, dev accuracy {acc:.4}"),
            None => log::info!("epoch {epoch}: loss {mean_loss:.4}"),
        }
        logs.push(EpochLog { epoch, mean_loss, dev_accuracy });
    }
    Ok((model, logs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;
    use crate::repr::ReprMode;

    fn corpus() -> Corpus {
        Corpus::from_pairs(
            Split::Train,
            &[
                vec![("the", "DET"), ("dog", "NOUN"), ("barks", "VERB")],
                vec![("a", "DET"), ("cat", "NOUN"), ("sleeps", "VERB")],
                vec![("the", "DET"), ("cat", "NOUN"), ("barks", "VERB")],
            ],
        )
    }

    fn hp() -> Hyperparams {
        Hyperparams { word_dim: 8, subtoken_dim: 6, hidden_dim: 8, epochs: 15, repr: ReprMode::WC, ..Hyperparams::default() }
    }

    #[test]
    fn learns_a_tiny_corpus() {
        let c = corpus();
        let (m, logs) = train(&c, &hp(), None).unwrap();
        assert!(logs.last().unwrap().mean_loss < logs[0].mean_loss);
        assert_eq!(accuracy(&m, &c).unwrap(), 1.0);
    }

    #[test]
    fn same_seed_same_model() {
        let h = Hyperparams { epochs: 2, freqbin: true, ..hp() };
        let a = train(&corpus(), &h, None).unwrap().0.to_bytes().unwrap();
        let b = train(&corpus(), &h, None).unwrap().0.to_bytes().unwrap();
        assert_eq!(a, b);
        let c = train(&corpus(), &Hyperparams { seed: 2, ..h }, None).unwrap().0.to_bytes().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn huge_rate_diverges() {
        let h = Hyperparams { lr: 1e300, epochs: 3, ..hp() };
        assert!(matches!(train(&corpus(), &h, None), Err(Error::Divergence { epoch: 1, .. })));
    }

    #[test]
    fn dev_accuracy_logged() {
        let c = corpus();
        let (_, logs) = train(&c, &Hyperparams { epochs: 1, ..hp() }, Some(&c)).unwrap();
        assert!(logs[0].dev_accuracy.is_some());
    }
}
