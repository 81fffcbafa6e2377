//! Synthetic semantic field: maps positions to paired (visual, semantic)
//! unit embeddings and encodes instructions into query embeddings.
//!
//! Embeddings are seeded unit Gaussians per label, so equal labels always
//! agree and distinct labels are near-orthogonal at n = 64. The field itself
//! is a pure function of (scenario extents, n, seed).

use crate::geometry::{Point, Rect};
use crate::scenario::{Instruction, Scenario};
use crate::seeded::{sub_rng, unit_gaussian_vec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_EMBED_DIM: usize = 64;
pub const DEFAULT_VISUAL_WEIGHT: f64 = 0.5;
/// Magnitude of the seeded perturbation applied to image-goal embeddings.
pub const IMAGE_NOISE_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Visual,
    Semantic,
}

impl Channel {
    fn tag(self) -> &'static str {
        match self {
            Channel::Visual => "visual",
            Channel::Semantic => "semantic",
        }
    }
}

/// Unit-norm embedding vector, or the all-zero sentinel for "outside any
/// mapped extent".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub channel: Channel,
}

impl Embedding {
    pub fn zero(n: usize, channel: Channel) -> Self {
        Self {
            values: vec![0.0; n],
            channel,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity; zero when either side is the zero sentinel.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64, FieldError> {
    if a.values.len() != b.values.len() {
        return Err(FieldError::DimensionMismatch {
            left: a.values.len(),
            right: b.values.len(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na < 1e-12 || nb < 1e-12 {
        return Ok(0.0);
    }
    let dot: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x * y)
        .sum();
    Ok(dot / (na * nb))
}

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("image instruction names unknown object id {0:?}")]
    UnknownObject(String),
}

/// Deterministic per-label embedding: seeded standard normals, normalized.
pub fn label_embedding(label: &str, channel: Channel, n: usize, global_seed: u64) -> Embedding {
    let mut rng = sub_rng(global_seed, &["field", channel.tag(), label]);
    Embedding {
        values: unit_gaussian_vec(&mut rng, n),
        channel,
    }
}

/// Query embedding pair for text/image instructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEmbedding {
    pub c: Embedding,
    pub s: Embedding,
}

/// Result of instruction encoding: a similarity query or a direct position.
#[derive(Debug, Clone, PartialEq)]
pub enum EncodedGoal {
    Query(QueryEmbedding),
    Position(Point),
}

#[derive(Debug, Clone)]
struct LabeledExtent {
    rect: Rect,
    /// Visual label of the extent (object label, or room label for rooms).
    visual: String,
    /// Semantic label (always the containing room's label).
    semantic: String,
}

/// Queryable semantic field backed by labeled extents from a scenario.
#[derive(Debug, Clone)]
pub struct SemanticField {
    pub n: usize,
    pub global_seed: u64,
    objects: Vec<LabeledExtent>,
    rooms: Vec<LabeledExtent>,
    object_ids: Vec<(String, String, String)>,
    cache: BTreeMap<(String, &'static str), Embedding>,
}

impl SemanticField {
    /// Bind the field over the scenario's rooms and objects.
    pub fn from_scenario(s: &Scenario, n: usize, global_seed: u64) -> Self {
        let mut objects = Vec::new();
        let mut object_ids = Vec::new();
        for o in &s.objects {
            let room_label = s
                .room(o.room)
                .map(|r| r.label.clone())
                .unwrap_or_default();
            objects.push(LabeledExtent {
                rect: o.rect,
                visual: o.label.clone(),
                semantic: room_label.clone(),
            });
            object_ids.push((o.id.clone(), o.label.clone(), room_label));
        }
        let rooms = s
            .rooms
            .iter()
            .map(|r| LabeledExtent {
                rect: r.rect,
                visual: r.label.clone(),
                semantic: r.label.clone(),
            })
            .collect();
        let mut field = Self {
            n,
            global_seed,
            objects,
            rooms,
            object_ids,
            cache: BTreeMap::new(),
        };
        field.warm_cache();
        field
    }

    fn warm_cache(&mut self) {
        let mut labels: Vec<(String, Channel)> = Vec::new();
        for e in self.objects.iter().chain(self.rooms.iter()) {
            labels.push((e.visual.clone(), Channel::Visual));
            labels.push((e.semantic.clone(), Channel::Semantic));
        }
        for (label, ch) in labels {
            self.cache
                .entry((label.clone(), ch.tag()))
                .or_insert_with(|| label_embedding(&label, ch, self.n, self.global_seed));
        }
    }

    fn cached(&self, label: &str, ch: Channel) -> Embedding {
        self.cache
            .get(&(label.to_string(), ch.tag()))
            .cloned()
            .unwrap_or_else(|| label_embedding(label, ch, self.n, self.global_seed))
    }

    /// All labels the field knows, for the debug dump.
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .cache
            .keys()
            .map(|(l, _)| l.clone())
            .collect();
        out.dedup();
        out
    }

    /// F(p): paired (visual, semantic) embeddings at a position. Object
    /// extents take precedence over their room; outside everything the
    /// zero sentinel comes back.
    pub fn query(&self, p: Point) -> (Embedding, Embedding) {
        if let Some(o) = self.objects.iter().find(|e| e.rect.contains(p)) {
            return (
                self.cached(&o.visual, Channel::Visual),
                self.cached(&o.semantic, Channel::Semantic),
            );
        }
        if let Some(r) = self.rooms.iter().find(|e| e.rect.contains(p)) {
            return (
                self.cached(&r.visual, Channel::Visual),
                self.cached(&r.semantic, Channel::Semantic),
            );
        }
        (
            Embedding::zero(self.n, Channel::Visual),
            Embedding::zero(self.n, Channel::Semantic),
        )
    }

    /// Encode an instruction into a query embedding or a direct position.
    pub fn encode_instruction(&self, instr: &Instruction) -> Result<EncodedGoal, FieldError> {
        match instr {
            Instruction::Text {
                target_label,
                region_label,
            } => {
                let c = self.cached(target_label, Channel::Visual);
                let s = self.cached(
                    region_label.as_deref().unwrap_or(target_label),
                    Channel::Semantic,
                );
                Ok(EncodedGoal::Query(QueryEmbedding { c, s }))
            }
            Instruction::Image { embedding_seed } => {
                let (label, room_label) = self
                    .object_ids
                    .iter()
                    .find(|(id, _, _)| id == embedding_seed)
                    .map(|(_, l, r)| (l.clone(), r.clone()))
                    .ok_or_else(|| FieldError::UnknownObject(embedding_seed.clone()))?;
                let c = perturb(
                    self.cached(&label, Channel::Visual),
                    IMAGE_NOISE_SIGMA,
                    self.global_seed,
                    embedding_seed,
                    "c",
                );
                let s = perturb(
                    self.cached(&room_label, Channel::Semantic),
                    IMAGE_NOISE_SIGMA,
                    self.global_seed,
                    embedding_seed,
                    "s",
                );
                Ok(EncodedGoal::Query(QueryEmbedding { c, s }))
            }
            Instruction::Position { position } => Ok(EncodedGoal::Position(*position)),
        }
    }

    /// Debug dump: labels only, embeddings are always recomputed.
    pub fn dump(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "seed": self.global_seed,
            "labels": self.labels(),
        })
    }
}

/// Add a seeded unit perturbation of magnitude `sigma`, then renormalize.
/// Keeps cos(original, perturbed) >= sqrt(1 - sigma^2) regardless of seed.
fn perturb(base: Embedding, sigma: f64, global_seed: u64, seed_label: &str, part: &str) -> Embedding {
    let mut rng = sub_rng(global_seed, &["image_noise", seed_label, part]);
    let noise = unit_gaussian_vec(&mut rng, base.values.len());
    let mut values: Vec<f64> = base
        .values
        .iter()
        .zip(&noise)
        .map(|(b, u)| b + sigma * u)
        .collect();
    let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
    for v in &mut values {
        *v /= norm;
    }
    Embedding {
        values,
        channel: base.channel,
    }
}

/// Convex combination of per-channel cosines; zero sentinel contributes zero.
pub fn combined_similarity(
    q: &QueryEmbedding,
    f_v: &Embedding,
    f_s: &Embedding,
    w_v: f64,
) -> Result<f64, FieldError> {
    Ok(w_v * cosine(&q.c, f_v)? + (1.0 - w_v) * cosine(&q.s, f_s)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use crate::scenario::{Door, ObjectSpec, Room};

    pub(crate) fn fixture3r_with_chair() -> Scenario {
        Scenario {
            name: "fixture3r".into(),
            cell_size_m: 0.1,
            bounds_m: [12.0, 4.0],
            rooms: vec![
                Room { id: 0, label: "living room".into(), rect: Rect::new(0.0, 0.0, 4.0, 4.0) },
                Room { id: 1, label: "hall".into(), rect: Rect::new(4.0, 0.0, 8.0, 4.0) },
                Room { id: 2, label: "kitchen".into(), rect: Rect::new(8.0, 0.0, 12.0, 4.0) },
            ],
            doors: vec![
                Door { id: "d0".into(), connects: [0, 1], position: Point::new(4.0, 2.0), width_m: 0.9 },
                Door { id: "d1".into(), connects: [1, 2], position: Point::new(8.0, 2.0), width_m: 0.9 },
            ],
            objects: vec![ObjectSpec {
                id: "chair_1".into(),
                label: "chair".into(),
                room: 2,
                rect: Rect::new(10.2, 1.6, 11.0, 2.4),
                blocking: false,
            }],
            dynamic_obstacles: vec![],
            start: Pose::xy(1.0, 2.0, 0.0),
            tasks: vec![],
        }
    }

    #[test]
    fn label_embedding_is_deterministic_and_unit() {
        let a = label_embedding("chair", Channel::Visual, 64, 42);
        let b = label_embedding("chair", Channel::Visual, 64, 42);
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-9);
        assert!((cosine(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distinct_labels_near_orthogonal() {
        let labels = ["chair", "couch", "potted plant", "bed", "toilet", "tv"];
        let chair = label_embedding("chair", Channel::Visual, 64, 42);
        let bed = label_embedding("bed", Channel::Visual, 64, 42);
        let cb = cosine(&chair, &bed).unwrap();
        assert!(cb.abs() < 0.5, "cos(chair, bed) = {cb}");
        let mut sum = 0.0;
        let mut count = 0;
        for (i, a) in labels.iter().enumerate() {
            for b in &labels[i + 1..] {
                let ea = label_embedding(a, Channel::Visual, 64, 42);
                let eb = label_embedding(b, Channel::Visual, 64, 42);
                sum += cosine(&ea, &eb).unwrap().abs();
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!(mean < 0.25, "mean |cos| over label set = {mean}");
    }

    #[test]
    fn field_query_containment_rules() {
        let s = fixture3r_with_chair();
        let f = SemanticField::from_scenario(&s, 64, 42);
        let (fv, fs) = f.query(Point::new(10.5, 2.0));
        assert_eq!(fv, label_embedding("chair", Channel::Visual, 64, 42));
        assert_eq!(fs, label_embedding("kitchen", Channel::Semantic, 64, 42));
        let (fv, fs) = f.query(Point::new(1.0, 2.0));
        assert_eq!(fv, label_embedding("living room", Channel::Visual, 64, 42));
        assert_eq!(fs, label_embedding("living room", Channel::Semantic, 64, 42));
        let (fv, fs) = f.query(Point::new(-5.0, -5.0));
        assert!(fv.is_zero() && fs.is_zero());
    }

    #[test]
    fn zero_sentinel_similarity_is_zero() {
        let s = fixture3r_with_chair();
        let f = SemanticField::from_scenario(&s, 64, 42);
        let q = match f
            .encode_instruction(&Instruction::Text {
                target_label: "chair".into(),
                region_label: Some("kitchen".into()),
            })
            .unwrap()
        {
            EncodedGoal::Query(q) => q,
            _ => unreachable!(),
        };
        let (fv, fs) = f.query(Point::new(-5.0, -5.0));
        assert_eq!(combined_similarity(&q, &fv, &fs, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn text_encoding_matches_label_embeddings() {
        let s = fixture3r_with_chair();
        let f = SemanticField::from_scenario(&s, 64, 42);
        let q = match f
            .encode_instruction(&Instruction::Text {
                target_label: "chair".into(),
                region_label: Some("kitchen".into()),
            })
            .unwrap()
        {
            EncodedGoal::Query(q) => q,
            _ => unreachable!(),
        };
        assert_eq!(q.c, label_embedding("chair", Channel::Visual, 64, 42));
        assert_eq!(q.s, label_embedding("kitchen", Channel::Semantic, 64, 42));
        let (fv, fs) = f.query(Point::new(10.5, 2.0));
        assert!((combined_similarity(&q, &fv, &fs, 0.5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn position_instruction_bypasses() {
        let s = fixture3r_with_chair();
        let f = SemanticField::from_scenario(&s, 64, 42);
        let got = f
            .encode_instruction(&Instruction::Position {
                position: Point::new(10.0, 2.0),
            })
            .unwrap();
        assert_eq!(got, EncodedGoal::Position(Point::new(10.0, 2.0)));
    }

    #[test]
    fn image_noise_keeps_high_similarity() {
        // 1000 seed labels; the 5th percentile must clear the 0.9 bound
        let base = label_embedding("chair", Channel::Visual, 64, 42);
        let mut sims: Vec<f64> = (0..1000)
            .map(|k| {
                let e = perturb(base.clone(), IMAGE_NOISE_SIGMA, 42, &format!("obj_{k}"), "c");
                cosine(&base, &e).unwrap()
            })
            .collect();
        sims.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p5 = sims[50];
        assert!(p5 >= 0.9, "5th percentile similarity = {p5}");
        assert!(sims[0] >= 0.9);
    }

    #[test]
    fn image_encoding_unknown_object_errors() {
        let s = fixture3r_with_chair();
        let f = SemanticField::from_scenario(&s, 64, 42);
        let err = f
            .encode_instruction(&Instruction::Image {
                embedding_seed: "sofa_9".into(),
            })
            .unwrap_err();
        assert!(err.to_string().contains("sofa_9"));
    }

    #[test]
    fn weight_edges() {
        let q = QueryEmbedding {
            c: label_embedding("chair", Channel::Visual, 64, 42),
            s: label_embedding("kitchen", Channel::Semantic, 64, 42),
        };
        // dims padded differently -> error
        let short = Embedding::zero(32, Channel::Visual);
        assert!(cosine(&q.c, &short).is_err());
        // w_v = 1 with orthogonalized visual channel -> ~0
        let mut ortho = label_embedding("bed", Channel::Visual, 64, 42);
        let d = cosine(&q.c, &ortho).unwrap();
        for (o, c) in ortho.values.iter_mut().zip(&q.c.values) {
            *o -= d * c;
        }
        let fs = label_embedding("kitchen", Channel::Semantic, 64, 42);
        let sim = combined_similarity(&q, &ortho, &fs, 1.0).unwrap();
        assert!(sim.abs() < 1e-9);
    }

    #[test]
    fn channel_separation() {
        let s = fixture3r_with_chair();
        let f = SemanticField::from_scenario(&s, 64, 42);
        let enc = |region: &str| match f
            .encode_instruction(&Instruction::Text {
                target_label: "chair".into(),
                region_label: Some(region.into()),
            })
            .unwrap()
        {
            EncodedGoal::Query(q) => q,
            _ => unreachable!(),
        };
        let q1 = enc("kitchen");
        let q2 = enc("hall");
        assert_eq!(q1.c, q2.c);
        assert_ne!(q1.s, q2.s);
    }
}
