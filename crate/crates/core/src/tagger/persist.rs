use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Hyperparams, TaggerModel};
use crate::autodiff::{ParamStore, Tensor};
use crate::container::{self, ContainerError};
use crate::error::Result;
use crate::repr::Vocab;

pub const KIND: &str = "bilstm";

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    hyperparams: Hyperparams,
    tagset: Vec<String>,
    n_bins: usize,
    vocab: Vocab,
    params: Vec<ParamEntry>,
}

impl TaggerModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut params = Vec::with_capacity(self.store.len());
        let mut values = Vec::with_capacity(self.store.num_values());
        for (_, p) in self.store.iter() {
            params.push(ParamEntry { name: p.name.clone(), shape: p.tensor.shape().to_vec(), trainable: p.trainable });
            values.extend_from_slice(p.tensor.data());
        }
        let header = Header {
            kind: KIND.to_string(),
            hyperparams: self.hp.clone(),
            tagset: self.tagset.clone(),
            n_bins: self.n_bins,
            vocab: self.vocab.clone(),
            params,
        };
        Ok(container::encode(&header, &values)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let found = container::peek_kind(bytes)?;
        if found != KIND {
            return Err(ContainerError::Kind { expected: KIND.into(), found }.into());
        }
        let (header, values): (Header, Vec<f64>) = container::decode(bytes)?;
        let mut store = ParamStore::new();
        let mut offset = 0;
        for entry in header.params {
            let n: usize = entry.shape.iter().product();
            let end = offset + n;
            if end > values.len() {
                return Err(ContainerError::Inconsistent(format!("values end before parameter `{}`", entry.name)).into());
            }
            let tensor = Tensor::new(entry.shape, values[offset..end].to_vec())?;
            let id = store.add(entry.name, tensor)?;
            store.set_trainable(id, entry.trainable);
            offset = end;
        }
        if offset != values.len() {
            return Err(ContainerError::Inconsistent(format!("{} unclaimed values", values.len() - offset)).into());
        }
        TaggerModel::assemble(header.hyperparams, header.vocab, header.tagset, header.n_bins, store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::write_bytes(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&container::read_bytes(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Rng;
    use crate::corpus::{Corpus, Split};
    use crate::error::Error;
    use crate::repr::ReprMode;

    fn model(repr: ReprMode) -> TaggerModel {
        let c = Corpus::from_pairs(Split::Train, &[vec![("Ducks", "NOUN"), ("quack", "VERB")], vec![("ducks", "NOUN")]]);
        let hp = Hyperparams { word_dim: 3, subtoken_dim: 2, hidden_dim: 2, repr, freqbin: true, ..Hyperparams::default() };
        TaggerModel::init(&c, &hp, &mut Rng::new(9)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        for mode in [ReprMode::W, ReprMode::C, ReprMode::B, ReprMode::CB, ReprMode::WC] {
            let m = model(mode);
            let bytes = m.to_bytes().unwrap();
            let back = TaggerModel::from_bytes(&bytes).unwrap();
            assert_eq!(back.to_bytes().unwrap(), bytes);
            let forms = vec!["Ducks".to_string(), "fly".to_string()];
            let (a, b) = (m.tag_scores(&forms).unwrap(), back.tag_scores(&forms).unwrap());
            for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn wrong_kind_rejected() {
        let bytes = container::encode(&serde_json::json!({"kind": "tnt"}), &[]).unwrap();
        assert!(matches!(
            TaggerModel::from_bytes(&bytes),
            Err(Error::Container(ContainerError::Kind { .. }))
        ));
    }

    #[test]
    fn corrupt_file_rejected() {
        let mut bytes = model(ReprMode::W).to_bytes().unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x10;
        assert!(matches!(TaggerModel::from_bytes(&bytes), Err(Error::Container(_))));
    }
}
