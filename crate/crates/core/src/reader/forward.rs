use std::fmt;

use super::anon::{AnonymizationMap, ContextBundle};
use super::model::{ReaderModel, Variant};
use crate::corpus::{EncodedSequence, EntityId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Grads, Graph, Var};

/// Lower bound on the answer mass inside the log of the loss.
pub const LOSS_FLOOR: f64 = 1e-12;

/// Graph handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardVars {
    pub question: Var,
    pub context_states: Option<Var>,
    /// Attention over context positions.
    pub attention: Option<Var>,
    /// Distinct context entities in ascending id order, aligned with `p_att`.
    pub context_entities: Vec<EntityId>,
    pub p_att: Option<Var>,
    pub summary: Var,
    pub vocab_logits: Option<Var>,
    pub p_vocab: Option<Var>,
    /// Mixture weight of the vocabulary part actually applied.
    pub gate: Option<Var>,
}

/// Softmax over positions of `H v`.
pub fn attend<T: Scalar>(g: &mut Graph<T>, v: Var, states: Var) -> Result<Var> {
    let logits = g.matvec(states, v)?;
    g.softmax(logits)
}

/// Sums position attention per entity and renormalizes over entities.
///
/// Returns `None` when no position carries an entity.
pub fn attention_entity_distribution<T: Scalar>(
    g: &mut Graph<T>,
    attention: Var,
    entities: &[Option<EntityId>],
) -> Result<Option<(Var, Vec<EntityId>)>> {
    let mut ids: Vec<EntityId> = entities.iter().flatten().copied().collect();
    ids.sort();
    ids.dedup();
    if ids.is_empty() {
        return Ok(None);
    }
    let mut groups = vec![Vec::new(); ids.len()];
    for (i, e) in entities.iter().enumerate() {
        if let Some(e) = e {
            let slot = ids.binary_search(e).expect("id collected above");
            groups[slot].push(i);
        }
    }
    let mass = g.group_sum(attention, groups)?;
    Ok(Some((g.normalize(mass)?, ids)))
}

/// `u = H^T s`.
pub fn context_summary<T: Scalar>(g: &mut Graph<T>, attention: Var, states: Var) -> Result<Var> {
    g.matvec_t(states, attention)
}

impl<T: Scalar> ReaderModel<T> {
    /// Rows are `(W_w[w] + W_c[c]) ++ W_e[column]`, with a zero entity part
    /// at positions outside every entity.
    pub fn embed_sequence(
        &self,
        g: &mut Graph<T>,
        seq: &EncodedSequence,
        anon: &AnonymizationMap,
    ) -> Result<Var> {
        if seq.is_empty() {
            return Err(Error::invalid("cannot embed an empty sequence"));
        }
        let words: Vec<usize> = seq.words.iter().map(|w| w.index()).collect();
        let caps: Vec<usize> = seq.caps.iter().map(|&c| usize::from(c)).collect();
        let mut bags = Vec::with_capacity(seq.len());
        for e in &seq.entities {
            match e {
                Some(e) => {
                    let col = anon.column(*e).ok_or_else(|| {
                        Error::contract(format!("entity {} missing from anonymization map", e.0))
                    })?;
                    bags.push(vec![col]);
                }
                None => bags.push(Vec::new()),
            }
        }
        let w = g.embed_ids(self.word_emb, &words)?;
        let c = g.embed_ids(self.caps_emb, &caps)?;
        let wc = g.add(w, c)?;
        let ent = g.embed(self.entity_emb, bags)?;
        g.concat_cols(wc, ent)
    }

    /// Forward final state followed by backward first state.
    pub fn encode_question(
        &self,
        g: &mut Graph<T>,
        seq: &EncodedSequence,
        anon: &AnonymizationMap,
    ) -> Result<Var> {
        if seq.is_empty() {
            return Err(Error::invalid("empty question"));
        }
        let x = self.embed_sequence(g, seq, anon)?;
        Ok(self.question_rnn.run(g, x)?.ends)
    }

    /// One row per vocabulary entity: summed surface word and caps
    /// embeddings, then the entity's mapped column (or the reserved one).
    pub fn entity_vectors(&self, g: &mut Graph<T>, anon: &AnonymizationMap) -> Result<Var> {
        let words = g.embed(self.word_emb, self.vocab_word_bags.clone())?;
        let caps = g.embed(self.caps_emb, self.vocab_caps_bags.clone())?;
        let wc = g.add(words, caps)?;
        let cols: Vec<usize> = self
            .vocab_entities
            .iter()
            .map(|&e| anon.column(e).unwrap_or(anon.reserved()))
            .collect();
        let ent = g.embed_ids(self.entity_emb, &cols)?;
        g.concat_cols(wc, ent)
    }

    fn project(&self, g: &mut Graph<T>, u: Var) -> Result<Var> {
        let w = g.param(self.proj_w);
        let b = g.param(self.proj_b);
        let pu = g.matvec(w, u)?;
        g.add(pu, b)
    }

    /// Builds the full forward pass. `gate_override` pins the mixture weight.
    pub fn build(
        &self,
        g: &mut Graph<T>,
        question: &EncodedSequence,
        context: &ContextBundle,
        anon: &AnonymizationMap,
        gate_override: Option<T>,
    ) -> Result<ForwardVars> {
        let variant = self.config.variant;
        let v = self.encode_question(g, question, anon)?;

        let (states, attention, summary) = if context.is_empty() {
            // nothing to read: the question vector stands in for the summary
            (None, None, v)
        } else {
            let x = self.embed_sequence(g, &context.sequence, anon)?;
            let h = self.context_rnn.run(g, x)?.states;
            let s = attend(g, v, h)?;
            let u = context_summary(g, s, h)?;
            (Some(h), Some(s), u)
        };

        let (p_att, context_entities) = match (attention, variant.uses_attention()) {
            (Some(s), true) => {
                match attention_entity_distribution(g, s, &context.sequence.entities)? {
                    Some((p, ids)) => (Some(p), ids),
                    None => (None, Vec::new()),
                }
            }
            _ => (None, Vec::new()),
        };

        let (vocab_logits, p_vocab) = if variant.uses_vocab() && !self.vocab_entities.is_empty() {
            let vmat = self.entity_vectors(g, anon)?;
            let pu = self.project(g, summary)?;
            let logits = g.matvec(vmat, pu)?;
            (Some(logits), Some(g.softmax(logits)?))
        } else {
            (None, None)
        };

        let gate = match (self.gate_params(), vocab_logits) {
            (Some((w, b)), Some(logits)) => Some(match (p_att.is_some(), gate_override) {
                (false, _) => g.constant(T::one()),
                (true, Some(x)) => g.constant(x),
                (true, None) => {
                    let vu = g.dot(v, summary)?;
                    let top = g.max(logits)?;
                    let g0 = g.concat(&[vu, top])?;
                    let wv = g.param(w);
                    let bv = g.param(b);
                    let z = g.dot(wv, g0)?;
                    let z = g.add(z, bv)?;
                    g.sigmoid(z)
                }
            }),
            _ => None,
        };

        Ok(ForwardVars {
            question: v,
            context_states: states,
            attention,
            context_entities,
            p_att,
            summary,
            vocab_logits,
            p_vocab,
            gate,
        })
    }

    /// `-ln(max(sum of mixed probability over answers, floor))`.
    pub fn loss_var(
        &self,
        g: &mut Graph<T>,
        fv: &ForwardVars,
        answers: &[EntityId],
    ) -> Result<Var> {
        let mass_of = |g: &mut Graph<T>, p: Option<Var>, ids: &[EntityId]| -> Result<Option<Var>> {
            let Some(p) = p else { return Ok(None) };
            let idx: Vec<usize> = answers
                .iter()
                .filter_map(|a| ids.binary_search(a).ok())
                .collect();
            Ok(Some(g.group_sum(p, vec![idx])?))
        };
        let att = mass_of(g, fv.p_att, &fv.context_entities)?;
        let voc = mass_of(g, fv.p_vocab, &self.vocab_entities)?;
        let mass = match (att, voc, fv.gate) {
            (Some(a), Some(v), Some(gate)) => {
                let keep = g.affine(gate, -T::one(), T::one());
                let a = g.mul(keep, a)?;
                let v = g.mul(gate, v)?;
                g.add(a, v)?
            }
            (None, Some(v), Some(gate)) => g.mul(gate, v)?,
            (Some(a), None, _) => a,
            (None, Some(v), None) => v,
            (Some(a), Some(_), None) => a,
            (None, None, _) => g.constant(T::zero()),
        };
        g.neg_log_floor(mass, T::of(LOSS_FLOOR))
    }

    pub fn forward(
        &self,
        question: &EncodedSequence,
        context: &ContextBundle,
        anon: &AnonymizationMap,
    ) -> Result<AnswerDistribution<T>> {
        self.forward_with_gate(question, context, anon, None)
    }

    pub fn forward_with_gate(
        &self,
        question: &EncodedSequence,
        context: &ContextBundle,
        anon: &AnonymizationMap,
        gate_override: Option<T>,
    ) -> Result<AnswerDistribution<T>> {
        let mut g = Graph::new(&self.store);
        let fv = self.build(&mut g, question, context, anon, gate_override)?;
        Ok(self.distribution(&g, &fv))
    }

    /// Loss for one pair; with `grads`, also backpropagates into it.
    pub fn loss(
        &self,
        question: &EncodedSequence,
        context: &ContextBundle,
        anon: &AnonymizationMap,
        answers: &[EntityId],
        grads: Option<&mut Grads<T>>,
    ) -> Result<T> {
        let mut g = Graph::new(&self.store);
        let fv = self.build(&mut g, question, context, anon, None)?;
        let loss = self.loss_var(&mut g, &fv, answers)?;
        if let Some(grads) = grads {
            g.backward(loss, grads)?;
        }
        Ok(g.value(loss).item())
    }

    pub fn distribution(&self, g: &Graph<T>, fv: &ForwardVars) -> AnswerDistribution<T> {
        let values = |v: Option<Var>| v.map(|v| g.value(v).data().to_vec()).unwrap_or_default();
        let p_att = values(fv.p_att);
        let p_vocab = values(fv.p_vocab);
        let vocab_entities = if fv.p_vocab.is_some() {
            self.vocab_entities.clone()
        } else {
            Vec::new()
        };
        let gate = fv.gate.map(|v| g.value(v).item());
        let (w_att, w_voc) = match (self.config.variant, gate) {
            (Variant::A, _) => (T::one(), T::zero()),
            (Variant::V, _) => (T::zero(), T::one()),
            (_, Some(g)) => (T::one() - g, g),
            (_, None) => (T::one(), T::zero()),
        };
        let mut candidates: Vec<EntityId> = fv
            .context_entities
            .iter()
            .chain(&vocab_entities)
            .copied()
            .collect();
        candidates.sort();
        candidates.dedup();
        let p = candidates
            .iter()
            .map(|e| {
                let a = fv
                    .context_entities
                    .binary_search(e)
                    .map(|i| p_att[i])
                    .unwrap_or(T::zero());
                let v = vocab_entities
                    .binary_search(e)
                    .map(|i| p_vocab[i])
                    .unwrap_or(T::zero());
                w_att * a + w_voc * v
            })
            .collect();
        AnswerDistribution {
            attention: values(fv.attention),
            context_entities: fv.context_entities.clone(),
            p_att,
            vocab_entities,
            p_vocab,
            gate,
            candidates,
            p,
            weights: (w_att, w_voc),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnswerSource {
    Attention,
    Vocabulary,
}

impl fmt::Display for AnswerSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnswerSource::Attention => "attention",
            AnswerSource::Vocabulary => "vocab",
        })
    }
}

/// Output of one forward pass: both component distributions, the gate and
/// the mixture over the union of their candidates.
#[derive(Clone, Debug, PartialEq)]
pub struct AnswerDistribution<T> {
    /// Attention over context positions.
    pub attention: Vec<T>,
    pub context_entities: Vec<EntityId>,
    pub p_att: Vec<T>,
    pub vocab_entities: Vec<EntityId>,
    pub p_vocab: Vec<T>,
    pub gate: Option<T>,
    /// Sorted union of context and vocabulary entities.
    pub candidates: Vec<EntityId>,
    pub p: Vec<T>,
    weights: (T, T),
}

impl<T: Scalar> AnswerDistribution<T> {
    pub fn prob(&self, e: EntityId) -> T {
        self.candidates
            .binary_search(&e)
            .map(|i| self.p[i])
            .unwrap_or(T::zero())
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Arg max of the mixture, lowest id on ties; `None` means no answer.
    pub fn predict(&self) -> Option<EntityId> {
        let mut best: Option<(EntityId, T)> = None;
        for (&e, &p) in self.candidates.iter().zip(&self.p) {
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((e, p));
            }
        }
        best.map(|(e, _)| e)
    }

    /// Candidates by descending probability, then ascending id.
    pub fn ranked(&self) -> Vec<(EntityId, T)> {
        let mut out: Vec<(EntityId, T)> = self
            .candidates
            .iter()
            .copied()
            .zip(self.p.iter().copied())
            .collect();
        out.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        out
    }

    /// Which part contributes more of `e`'s mixed probability.
    pub fn source(&self, e: EntityId) -> AnswerSource {
        let a = self
            .context_entities
            .binary_search(&e)
            .map(|i| self.p_att[i])
            .unwrap_or(T::zero());
        let v = self
            .vocab_entities
            .binary_search(&e)
            .map(|i| self.p_vocab[i])
            .unwrap_or(T::zero());
        if self.weights.0 * a >= self.weights.1 * v {
            AnswerSource::Attention
        } else {
            AnswerSource::Vocabulary
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[(u32, f64)]) -> AnswerDistribution<f64> {
        AnswerDistribution {
            attention: Vec::new(),
            context_entities: p.iter().map(|&(e, _)| EntityId(e)).collect(),
            p_att: p.iter().map(|&(_, x)| x).collect(),
            vocab_entities: Vec::new(),
            p_vocab: Vec::new(),
            gate: None,
            candidates: p.iter().map(|&(e, _)| EntityId(e)).collect(),
            p: p.iter().map(|&(_, x)| x).collect(),
            weights: (1.0, 0.0),
        }
    }

    #[test]
    fn predict_takes_the_arg_max_and_breaks_ties_low() {
        assert_eq!(dist(&[(3, 0.7), (5, 0.3)]).predict(), Some(EntityId(3)));
        assert_eq!(dist(&[(2, 0.5), (8, 0.5)]).predict(), Some(EntityId(2)));
        assert_eq!(dist(&[]).predict(), None);
        let ranked = dist(&[(2, 0.25), (4, 0.5), (8, 0.25)]).ranked();
        assert_eq!(
            ranked.iter().map(|r| r.0 .0).collect::<Vec<_>>(),
            vec![4, 2, 8]
        );
        assert_eq!(
            dist(&[(3, 0.7)]).source(EntityId(3)),
            AnswerSource::Attention
        );
    }
}
