//! CART decision trees, bagged random forests, and a holdout grid search used
//! to score representations.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{accuracy, confusion, fscore};
use crate::numerics::{Matrix, Rng};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        class: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
    n_classes: usize,
    max_depth: Option<usize>,
}

/// Gini impurity `1 − Σ p_c²` of a class histogram.
pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

/// Index of the largest count; ties go to the smaller index.
fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    max_depth: Option<usize>,
    max_features: Option<usize>,
    rng: &'a mut Rng,
    nodes: Vec<Node>,
}

struct BestSplit {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl TreeBuilder<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        rows.iter().for_each(|&r| counts[self.y[r]] += 1);
        counts
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.cols();
        match self.max_features {
            Some(m) if m < d => {
                let mut all: Vec<usize> = (0..d).collect();
                for i in 0..m {
                    let j = i + self.rng.below(d - i);
                    all.swap(i, j);
                }
                let mut chosen = all[..m].to_vec();
                chosen.sort_unstable();
                chosen
            }
            _ => (0..d).collect(),
        }
    }

    /// Lowest weighted child impurity over midpoints between distinct sorted
    /// values; ties keep the earlier feature, then the smaller threshold.
    fn best_split(
        &self,
        rows: &[usize],
        features: &[usize],
        parent: &[usize],
    ) -> Option<BestSplit> {
        let n = rows.len() as f64;
        let mut best: Option<BestSplit> = None;
        let mut sorted = rows.to_vec();
        for &f in features {
            sorted.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)));
            let mut left = vec![0usize; self.n_classes];
            let mut right = parent.to_vec();
            for i in 0..sorted.len() - 1 {
                let c = self.y[sorted[i]];
                left[c] += 1;
                right[c] -= 1;
                let (a, b) = (self.x.get(sorted[i], f), self.x.get(sorted[i + 1], f));
                if a == b {
                    continue;
                }
                let nl = (i + 1) as f64;
                let impurity = (nl * gini(&left) + (n - nl) * gini(&right)) / n;
                if best.as_ref().is_none_or(|s| impurity < s.impurity) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(BestSplit {
                        impurity,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class: majority(&counts),
        });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || rows.len() < 2 || self.max_depth.is_some_and(|m| depth >= m) {
            return id;
        }
        let features = self.candidate_features();
        let Some(split) = self.best_split(&rows, &features, &counts) else {
            return id;
        };
        if split.impurity > gini(&counts) + 1e-12 {
            return id;
        }
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.x.get(r, split.feature) <= split.threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        id
    }
}

fn check_training_data(x: &Matrix, y: &[usize], n_classes: usize) -> Result<()> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::EmptyInput(
            "classifier training data is empty".into(),
        ));
    }
    if y.len() != x.rows() {
        return Err(Error::dim(format!(
            "{} labels for {} rows",
            y.len(),
            x.rows()
        )));
    }
    if let Some(&c) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::dim(format!(
            "label {c} out of range for {n_classes} classes"
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("classifier training data".into()));
    }
    Ok(())
}

fn infer_classes(y: &[usize]) -> usize {
    y.iter().max().map_or(0, |&m| m + 1)
}

impl DecisionTree {
    /// Greedy Gini tree on all features. `max_depth = None` grows until leaves are pure.
    pub fn fit(x: &Matrix, y: &[usize], max_depth: Option<usize>, rng: &mut Rng) -> Result<Self> {
        Self::fit_with(x, y, infer_classes(y), max_depth, None, rng)
    }

    /// `max_features` limits the candidate features drawn per split.
    pub fn fit_with(
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        max_depth: Option<usize>,
        max_features: Option<usize>,
        rng: &mut Rng,
    ) -> Result<Self> {
        check_training_data(x, y, n_classes)?;
        let mut b = TreeBuilder {
            x,
            y,
            n_classes,
            max_depth,
            max_features,
            rng,
            nodes: Vec::new(),
        };
        b.grow((0..x.rows()).collect(), 0);
        Ok(Self {
            nodes: b.nodes,
            n_features: x.cols(),
            n_classes,
            max_depth,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn max_depth(&self) -> Option<usize> {
        self.max_depth
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn predict_row(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        check_width(x, self.n_features)?;
        Ok(x.iter_rows().map(|r| self.predict_row(r)).collect())
    }
}

fn check_width(x: &Matrix, expected: usize) -> Result<()> {
    if x.cols() != expected {
        return Err(Error::dim(format!(
            "input has {} features, model was trained on {expected}",
            x.cols()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_features: usize,
    n_classes: usize,
    max_features: usize,
    seed: u64,
}

impl RandomForest {
    /// Each tree sees a bootstrap sample of size `n` and draws `ceil(sqrt(d))`
    /// candidate features per split. Tree `t` uses the stream `Rng::derive(seed, t)`.
    pub fn fit(
        x: &Matrix,
        y: &[usize],
        n_estimators: usize,
        max_depth: Option<usize>,
        seed: u64,
    ) -> Result<Self> {
        Self::fit_with(x, y, infer_classes(y), n_estimators, max_depth, None, seed)
    }

    pub fn fit_with(
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        n_estimators: usize,
        max_depth: Option<usize>,
        max_features: Option<usize>,
        seed: u64,
    ) -> Result<Self> {
        check_training_data(x, y, n_classes)?;
        if n_estimators == 0 {
            return Err(Error::config("n_estimators must be at least 1"));
        }
        let d = x.cols();
        let m = max_features
            .unwrap_or_else(|| ((d as f64).sqrt().ceil() as usize).max(1))
            .min(d);
        let n = x.rows();
        let trees = (0..n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = Rng::derive(seed, t as u64);
                let sample: Vec<usize> = (0..n).map(|_| rng.below(n)).collect();
                let xs = x.select_rows(&sample);
                let ys: Vec<usize> = sample.iter().map(|&i| y[i]).collect();
                DecisionTree::fit_with(&xs, &ys, n_classes, max_depth, Some(m), &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            trees,
            n_features: d,
            n_classes,
            max_features: m,
            seed,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_estimators(&self) -> usize {
        self.trees.len()
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Majority vote over trees; ties go to the smaller class index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        check_width(x, self.n_features)?;
        let per_tree: Vec<Vec<usize>> = self
            .trees
            .iter()
            .map(|t| t.predict(x))
            .collect::<Result<_>>()?;
        Ok((0..x.rows())
            .map(|r| {
                let mut votes = vec![0usize; self.n_classes];
                per_tree.iter().for_each(|p| votes[p[r]] += 1);
                majority(&votes)
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierParams {
    Tree {
        max_depth: Option<usize>,
    },
    Forest {
        n_estimators: usize,
        max_depth: Option<usize>,
    },
}

impl std::fmt::Display for ClassifierParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let depth = |d: Option<usize>| d.map_or("none".to_string(), |d| d.to_string());
        match self {
            ClassifierParams::Tree { max_depth } => {
                write!(f, "dt(max_depth={})", depth(*max_depth))
            }
            ClassifierParams::Forest {
                n_estimators,
                max_depth,
            } => write!(
                f,
                "rf(n_estimators={n_estimators},max_depth={})",
                depth(*max_depth)
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Tree(DecisionTree),
    Forest(RandomForest),
}

impl Classifier {
    pub fn fit(
        params: ClassifierParams,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        Ok(match params {
            ClassifierParams::Tree { max_depth } => {
                let mut rng = Rng::new(seed);
                Classifier::Tree(DecisionTree::fit_with(
                    x, y, n_classes, max_depth, None, &mut rng,
                )?)
            }
            ClassifierParams::Forest {
                n_estimators,
                max_depth,
            } => Classifier::Forest(RandomForest::fit_with(
                x,
                y,
                n_classes,
                n_estimators,
                max_depth,
                None,
                seed,
            )?),
        })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        match self {
            Classifier::Tree(t) => t.predict(x),
            Classifier::Forest(f) => f.predict(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMetric {
    #[default]
    Accuracy,
    Fscore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchSpec {
    /// Evaluated in list order; the first of equally scoring candidates wins.
    pub candidates: Vec<ClassifierParams>,
    pub metric: SelectionMetric,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl GridSearchSpec {
    /// Cartesian product `n_estimators × max_depth` (forest) or `max_depth` (tree).
    pub fn forest(n_estimators: &[usize], max_depth: &[Option<usize>], seed: u64) -> Self {
        let candidates = n_estimators
            .iter()
            .flat_map(|&n| {
                max_depth.iter().map(move |&d| ClassifierParams::Forest {
                    n_estimators: n,
                    max_depth: d,
                })
            })
            .collect();
        Self {
            candidates,
            metric: SelectionMetric::Accuracy,
            validation_fraction: 0.2,
            seed,
        }
    }

    pub fn tree(max_depth: &[Option<usize>], seed: u64) -> Self {
        Self {
            candidates: max_depth
                .iter()
                .map(|&d| ClassifierParams::Tree { max_depth: d })
                .collect(),
            metric: SelectionMetric::Accuracy,
            validation_fraction: 0.2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::config("grid search needs at least one candidate"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::config(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best: ClassifierParams,
    pub best_score: f64,
    /// Validation score of every candidate, in list order.
    pub scores: Vec<(ClassifierParams, f64)>,
    /// Best candidate refitted on all training rows.
    pub model: Classifier,
}

/// Per-class holdout: `round(fraction · n_c)` rows of each class go to
/// validation, capped so at least one row of the class stays in training.
pub fn stratified_split(
    y: &[usize],
    n_classes: usize,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &c) in y.iter().enumerate() {
        if c >= n_classes {
            return Err(Error::dim(format!(
                "label {c} out of range for {n_classes} classes"
            )));
        }
        by_class[c].push(i);
    }
    let mut rng = Rng::new(seed);
    let (mut train, mut valid) = (Vec::new(), Vec::new());
    for (c, mut rows) in by_class.into_iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::Stratification(format!(
                "class {c} has no rows in the training split"
            )));
        }
        rng.shuffle(&mut rows);
        let n_val = ((fraction * rows.len() as f64).round() as usize).min(rows.len() - 1);
        valid.extend_from_slice(&rows[..n_val]);
        train.extend_from_slice(&rows[n_val..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    if valid.is_empty() {
        return Err(Error::Stratification("validation split is empty".into()));
    }
    Ok((train, valid))
}

fn score(
    metric: SelectionMetric,
    truth: &[usize],
    pred: &[usize],
    n_classes: usize,
) -> Result<f64> {
    let cm = confusion(truth, pred, n_classes)?;
    match metric {
        SelectionMetric::Accuracy => accuracy(&cm),
        SelectionMetric::Fscore => fscore(&cm),
    }
}

/// Picks the candidate with the best holdout score and refits it on all rows.
pub fn grid_search(
    spec: &GridSearchSpec,
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
) -> Result<GridSearchResult> {
    spec.validate()?;
    check_training_data(x, y, n_classes)?;
    let (train, valid) = stratified_split(y, n_classes, spec.validation_fraction, spec.seed)?;
    let (xt, xv) = (x.select_rows(&train), x.select_rows(&valid));
    let yt: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let yv: Vec<usize> = valid.iter().map(|&i| y[i]).collect();

    let mut scores = Vec::with_capacity(spec.candidates.len());
    let mut best: Option<(ClassifierParams, f64)> = None;
    for &params in &spec.candidates {
        let model = Classifier::fit(params, &xt, &yt, n_classes, spec.seed)?;
        let s = score(spec.metric, &yv, &model.predict(&xv)?, n_classes)?;
        scores.push((params, s));
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((params, s));
        }
    }
    let (best, best_score) = best.expect("at least one candidate");
    let model = Classifier::fit(best, x, y, n_classes, spec.seed)?;
    Ok(GridSearchResult {
        best,
        best_score,
        scores,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> (Matrix, Vec<usize>) {
        (
            Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]).unwrap(),
            vec![0, 1, 1, 0],
        )
    }

    /// Gaussian blobs centred at `centres`, `per_class` rows each.
    fn blobs(
        centres: &[[f64; 2]],
        per_class: usize,
        spread: f64,
        seed: u64,
    ) -> (Matrix, Vec<usize>) {
        let mut rng = Rng::new(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for _ in 0..per_class {
                rows.push([
                    centre[0] + spread * rng.normal(),
                    centre[1] + spread * rng.normal(),
                ]);
                y.push(c);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn gini_bounds() {
        assert_eq!(gini(&[5, 0]), 0.0);
        assert!((gini(&[5, 5]) - 0.5).abs() < 1e-15);
        assert!((gini(&[2, 2, 2]) - (1.0 - 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn single_class_is_a_leaf() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let t = DecisionTree::fit(&x, &[2, 2, 2], Some(5), &mut Rng::new(0)).unwrap();
        assert_eq!(t.nodes(), &[Node::Leaf { class: 2 }]);
        assert_eq!(t.depth(), 0);
    }

    #[test]
    fn xor_at_depth_two() {
        let (x, y) = xor();
        // Every single split of the four XOR points leaves weighted Gini at 0.5,
        // so the first split is a zero-gain split and the second separates fully.
        for f in 0..2 {
            let mut left = [0usize; 2];
            let mut right = [0usize; 2];
            for r in 0..4 {
                if x.get(r, f) <= 0.5 {
                    left[y[r]] += 1;
                } else {
                    right[y[r]] += 1;
                }
            }
            assert!((0.5 * gini(&left) + 0.5 * gini(&right) - 0.5).abs() < 1e-15);
        }
        let t = DecisionTree::fit(&x, &y, Some(2), &mut Rng::new(0)).unwrap();
        assert_eq!(t.predict(&x).unwrap(), y);
        assert!(t.depth() <= 2);
        let shallow = DecisionTree::fit(&x, &y, Some(1), &mut Rng::new(0)).unwrap();
        assert_ne!(shallow.predict(&x).unwrap(), y);
    }

    #[test]
    fn unlimited_tree_fits_consistent_data() {
        let mut rng = Rng::new(4);
        let x = Matrix::from_vec(80, 3, (0..240).map(|_| rng.next_f64()).collect()).unwrap();
        let y: Vec<usize> = (0..80).map(|_| rng.below(4)).collect();
        let t = DecisionTree::fit(&x, &y, None, &mut Rng::new(1)).unwrap();
        assert_eq!(t.predict(&x).unwrap(), y);
    }

    #[test]
    fn depth_limit_respected() {
        let mut rng = Rng::new(5);
        let x = Matrix::from_vec(100, 2, (0..200).map(|_| rng.next_f64()).collect()).unwrap();
        let y: Vec<usize> = (0..100).map(|_| rng.below(3)).collect();
        for d in [1, 2, 3, 5] {
            let t = DecisionTree::fit(&x, &y, Some(d), &mut Rng::new(0)).unwrap();
            assert!(t.depth() <= d);
        }
    }

    #[test]
    fn tree_errors() {
        let mut rng = Rng::new(0);
        assert!(DecisionTree::fit(&Matrix::zeros(0, 2), &[], None, &mut rng).is_err());
        let (x, y) = xor();
        let t = DecisionTree::fit(&x, &y, None, &mut rng).unwrap();
        assert!(t.predict(&Matrix::zeros(1, 3)).is_err());
        assert!(RandomForest::fit(&x, &y, 0, None, 0).is_err());
    }

    #[test]
    fn forest_of_one_on_one_feature_is_a_bootstrap_tree() {
        let x = Matrix::from_rows(&[[0.1], [0.4], [0.35], [0.8], [0.9], [0.2]]).unwrap();
        let y = vec![0, 1, 0, 1, 1, 0];
        let forest = RandomForest::fit(&x, &y, 1, None, 17).unwrap();
        let mut rng = Rng::derive(17, 0);
        let sample: Vec<usize> = (0..6).map(|_| rng.below(6)).collect();
        let ys: Vec<usize> = sample.iter().map(|&i| y[i]).collect();
        let tree = DecisionTree::fit_with(&x.select_rows(&sample), &ys, 2, None, Some(1), &mut rng)
            .unwrap();
        assert_eq!(&forest.trees()[0], &tree);
        assert_eq!(forest.predict(&x).unwrap(), tree.predict(&x).unwrap());
    }

    #[test]
    fn majority_vote_ties_to_smaller_class() {
        assert_eq!(majority(&[2, 1]), 0);
        assert_eq!(majority(&[1, 1, 1]), 0);
        assert_eq!(majority(&[0, 2, 2]), 1);
    }

    #[test]
    fn forest_prediction_is_mode_of_trees() {
        let (x, y) = blobs(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]], 30, 0.4, 3);
        let f = RandomForest::fit(&x, &y, 7, Some(4), 9).unwrap();
        let per_tree: Vec<Vec<usize>> = f.trees().iter().map(|t| t.predict(&x).unwrap()).collect();
        let pred = f.predict(&x).unwrap();
        for r in 0..x.rows() {
            let mut votes = [0usize; 3];
            per_tree.iter().for_each(|p| votes[p[r]] += 1);
            let max = *votes.iter().max().unwrap();
            let mode = votes.iter().position(|&v| v == max).unwrap();
            assert_eq!(pred[r], mode);
        }
    }

    #[test]
    fn forest_separates_blobs() {
        let centres = [[0.0, 0.0], [4.0, 4.0], [0.0, 4.0]];
        let (x, y) = blobs(&centres, 60, 0.6, 11);
        let (xt, yt) = blobs(&centres, 40, 0.6, 12);
        let f = RandomForest::fit(&x, &y, 20, None, 5).unwrap();
        let pred = f.predict(&xt).unwrap();
        let acc = pred.iter().zip(&yt).filter(|(a, b)| a == b).count() as f64 / yt.len() as f64;
        assert!(acc >= 0.95, "accuracy {acc}");
    }

    #[test]
    fn forest_is_deterministic() {
        let (x, y) = blobs(&[[0.0, 0.0], [1.0, 1.0]], 25, 0.7, 2);
        let a = RandomForest::fit(&x, &y, 6, None, 3).unwrap();
        let b = RandomForest::fit(&x, &y, 6, None, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stratified_split_keeps_every_class() {
        let y: Vec<usize> = (0..50).map(|i| usize::from(i >= 40)).collect();
        let (train, valid) = stratified_split(&y, 2, 0.2, 1).unwrap();
        assert_eq!(valid.len(), 10);
        assert_eq!(valid.iter().filter(|&&i| y[i] == 1).count(), 2);
        assert_eq!(train.len() + valid.len(), 50);
        assert!(matches!(
            stratified_split(&[0, 0, 2], 3, 0.2, 1),
            Err(Error::Stratification(_))
        ));
    }

    #[test]
    fn grid_single_candidate() {
        let (x, y) = blobs(&[[0.0, 0.0], [3.0, 3.0]], 20, 0.5, 1);
        let spec = GridSearchSpec::forest(&[7], &[Some(3)], 2);
        let r = grid_search(&spec, &x, &y, 2).unwrap();
        assert_eq!(
            r.best,
            ClassifierParams::Forest {
                n_estimators: 7,
                max_depth: Some(3)
            }
        );
        assert_eq!(r.scores.len(), 1);
    }

    #[test]
    fn grid_picks_dominant_candidate() {
        // Class depends on a nested interval structure a depth-1 stump cannot express.
        let mut rng = Rng::new(8);
        let rows: Vec<[f64; 1]> = (0..200).map(|_| [rng.next_f64()]).collect();
        let y: Vec<usize> = rows
            .iter()
            .map(|r| usize::from((r[0] * 6.0) as usize % 2 == 1))
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let spec = GridSearchSpec::tree(&[Some(1), None], 4);
        let r = grid_search(&spec, &x, &y, 2).unwrap();
        assert_eq!(r.best, ClassifierParams::Tree { max_depth: None });
        assert!(r.scores[1].1 > r.scores[0].1);

        let again = grid_search(&spec, &x, &y, 2).unwrap();
        assert_eq!(again.scores, r.scores);
    }

    #[test]
    fn grid_ties_go_to_first_candidate() {
        let (x, y) = blobs(&[[0.0, 0.0], [10.0, 10.0]], 20, 0.1, 1);
        let spec = GridSearchSpec::tree(&[Some(3), Some(5)], 0);
        let r = grid_search(&spec, &x, &y, 2).unwrap();
        assert_eq!(r.scores[0].1, r.scores[1].1);
        assert_eq!(r.best, ClassifierParams::Tree { max_depth: Some(3) });
    }

    #[test]
    fn grid_spec_validation() {
        let (x, y) = xor();
        let mut spec = GridSearchSpec::tree(&[], 0);
        assert!(grid_search(&spec, &x, &y, 2).is_err());
        spec = GridSearchSpec::tree(&[None], 0);
        spec.validation_fraction = 1.0;
        assert!(grid_search(&spec, &x, &y, 2).is_err());
    }
}
