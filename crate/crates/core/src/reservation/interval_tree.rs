//! AVL tree of half-open time intervals keyed by start time, augmented with
//! the maximum end time of each subtree for overlap queries.

use std::cmp::Ordering;

use crate::model::RobotId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub owner: RobotId,
    pub is_final: bool,
}

impl Interval {
    pub fn overlaps(&self, t1: f64, t2: f64) -> bool {
        self.start < t2 && t1 < self.end
    }

    fn key_cmp(&self, other: &Interval) -> Ordering {
        self.start
            .total_cmp(&other.start)
            .then(self.owner.cmp(&other.owner))
            .then(self.end.total_cmp(&other.end))
            .then(self.is_final.cmp(&other.is_final))
    }
}

type Link = Option<Box<Node>>;

#[derive(Debug, Clone)]
struct Node {
    iv: Interval,
    max_end: f64,
    height: i32,
    left: Link,
    right: Link,
}

fn height(n: &Link) -> i32 {
    n.as_ref().map_or(0, |n| n.height)
}

fn max_end(n: &Link) -> f64 {
    n.as_ref().map_or(f64::NEG_INFINITY, |n| n.max_end)
}

impl Node {
    fn leaf(iv: Interval) -> Box<Node> {
        Box::new(Node { iv, max_end: iv.end, height: 1, left: None, right: None })
    }

    fn update(&mut self) {
        self.height = 1 + height(&self.left).max(height(&self.right));
        self.max_end = self.iv.end.max(max_end(&self.left)).max(max_end(&self.right));
    }

    fn balance_factor(&self) -> i32 {
        height(&self.left) - height(&self.right)
    }
}

fn rotate_right(mut n: Box<Node>) -> Box<Node> {
    let mut l = n.left.take().expect("rotate_right without left child");
    n.left = l.right.take();
    n.update();
    l.right = Some(n);
    l.update();
    l
}

fn rotate_left(mut n: Box<Node>) -> Box<Node> {
    let mut r = n.right.take().expect("rotate_left without right child");
    n.right = r.left.take();
    n.update();
    r.left = Some(n);
    r.update();
    r
}

fn rebalance(mut n: Box<Node>) -> Box<Node> {
    n.update();
    let bf = n.balance_factor();
    if bf > 1 {
        if n.left.as_ref().is_some_and(|l| l.balance_factor() < 0) {
            n.left = Some(rotate_left(n.left.take().unwrap()));
        }
        return rotate_right(n);
    }
    if bf < -1 {
        if n.right.as_ref().is_some_and(|r| r.balance_factor() > 0) {
            n.right = Some(rotate_right(n.right.take().unwrap()));
        }
        return rotate_left(n);
    }
    n
}

fn insert(link: Link, iv: Interval) -> Box<Node> {
    match link {
        None => Node::leaf(iv),
        Some(mut n) => {
            if iv.key_cmp(&n.iv) == Ordering::Less {
                n.left = Some(insert(n.left.take(), iv));
            } else {
                n.right = Some(insert(n.right.take(), iv));
            }
            rebalance(n)
        }
    }
}

fn take_min(mut n: Box<Node>) -> (Link, Interval) {
    match n.left.take() {
        None => (n.right.take(), n.iv),
        Some(l) => {
            let (rest, min) = take_min(l);
            n.left = rest;
            (Some(rebalance(n)), min)
        }
    }
}

fn remove(link: Link, key: &Interval) -> (Link, bool) {
    let Some(mut n) = link else { return (None, false) };
    let removed = match key.key_cmp(&n.iv) {
        Ordering::Less => {
            let (l, r) = remove(n.left.take(), key);
            n.left = l;
            r
        }
        Ordering::Greater => {
            let (rt, r) = remove(n.right.take(), key);
            n.right = rt;
            r
        }
        Ordering::Equal => {
            return match (n.left.take(), n.right.take()) {
                (None, None) => (None, true),
                (Some(l), None) => (Some(l), true),
                (None, Some(r)) => (Some(r), true),
                (Some(l), Some(r)) => {
                    let (rest, min) = take_min(r);
                    n.iv = min;
                    n.left = Some(l);
                    n.right = rest;
                    (Some(rebalance(n)), true)
                }
            };
        }
    };
    (Some(rebalance(n)), removed)
}

/// Visits intervals overlapping `[t1, t2)` in start order until `f` returns false.
fn visit(link: &Link, t1: f64, t2: f64, f: &mut dyn FnMut(&Interval) -> bool) -> bool {
    let Some(n) = link else { return true };
    if n.max_end <= t1 {
        return true;
    }
    if !visit(&n.left, t1, t2, f) {
        return false;
    }
    if n.iv.start >= t2 {
        return true;
    }
    if n.iv.overlaps(t1, t2) && !f(&n.iv) {
        return false;
    }
    visit(&n.right, t1, t2, f)
}

fn in_order(link: &Link, out: &mut Vec<Interval>) {
    if let Some(n) = link {
        in_order(&n.left, out);
        out.push(n.iv);
        in_order(&n.right, out);
    }
}

#[derive(Debug, Clone, Default)]
pub struct IntervalTree {
    root: Link,
    len: usize,
}

impl IntervalTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn height(&self) -> i32 {
        height(&self.root)
    }

    pub fn insert(&mut self, iv: Interval) {
        self.root = Some(insert(self.root.take(), iv));
        self.len += 1;
    }

    /// Removes one interval equal to `iv`; returns whether one was found.
    pub fn remove(&mut self, iv: &Interval) -> bool {
        let (root, removed) = remove(self.root.take(), iv);
        self.root = root;
        if removed {
            self.len -= 1;
        }
        removed
    }

    /// True when some interval accepted by `counts` overlaps `[t1, t2)`.
    pub fn any_overlap(&self, t1: f64, t2: f64, counts: impl Fn(&Interval) -> bool) -> bool {
        let mut hit = false;
        visit(&self.root, t1, t2, &mut |iv| {
            hit = counts(iv);
            !hit
        });
        hit
    }

    pub fn overlapping(&self, t1: f64, t2: f64) -> Vec<Interval> {
        let mut out = Vec::new();
        visit(&self.root, t1, t2, &mut |iv| {
            out.push(*iv);
            true
        });
        out
    }

    pub fn to_vec(&self) -> Vec<Interval> {
        let mut out = Vec::with_capacity(self.len);
        in_order(&self.root, &mut out);
        out
    }

    /// Keeps only intervals matching `keep`; rebuilds the tree.
    pub fn retain(&mut self, keep: impl Fn(&Interval) -> bool) -> Vec<Interval> {
        let all = self.to_vec();
        let (kept, dropped): (Vec<_>, Vec<_>) = all.into_iter().partition(|iv| keep(iv));
        if !dropped.is_empty() {
            self.root = None;
            self.len = 0;
            for iv in kept {
                self.insert(iv);
            }
        }
        dropped
    }
}
