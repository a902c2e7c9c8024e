//! Exact nearest-neighbour queries over 3D points.

#[inline]
pub fn squared_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

const LEAF_SIZE: usize = 8;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

/// Static k-d tree; queries return the exact minimum squared distance.
pub struct KdTree {
    points: Vec<[f64; 3]>,
    root: Node,
}

impl KdTree {
    pub fn new(points: &[[f64; 3]]) -> Self {
        let mut points = points.to_vec();
        let n = points.len();
        let root = build(&mut points, 0, n, 0);
        Self { points, root }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance from `q` to its nearest point; `None` for an empty tree.
    pub fn nearest_squared(&self, q: &[f64; 3]) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        self.search(&self.root, q, &mut best);
        Some(best)
    }

    fn search(&self, node: &Node, q: &[f64; 3], best: &mut f64) {
        match node {
            Node::Leaf { start, end } => {
                for p in &self.points[*start..*end] {
                    let d = squared_distance(p, q);
                    if d < *best {
                        *best = d;
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= *best {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build(points: &mut [[f64; 3]], start: usize, end: usize, depth: usize) -> Node {
    let n = end - start;
    if n <= LEAF_SIZE {
        return Node::Leaf { start, end };
    }
    // Split on the axis of largest extent.
    let slice = &points[start..end];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in slice {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap_or(depth % 3);
    let mid = n / 2;
    points[start..end].select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    let value = points[start + mid][axis];
    // Left holds coordinates <= value, right >= value; pruning uses the split
    // plane so either side may hold ties.
    let left = build(points, start, start + mid, depth + 1);
    let right = build(points, start + mid, end, depth + 1);
    Node::Split { axis, value, left: Box::new(left), right: Box::new(right) }
}
