#include "lsvg/numerics/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lsvg/common/error.h"

namespace lsvg::ops {
namespace {

using Node = DiffArray::Node;

void CheckSameShape(const DiffArray& a, const DiffArray& b, const char* op) {
  LSVG_CHECK(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                         a.shape().ToString() + " vs " +
                                         b.shape().ToString());
}

// Softmax of one row into out; returns log of the normalizer.
double RowSoftmax(const double* x, size_t n, double* out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < n; ++j) mx = std::max(mx, x[j]);
  double z = 0.0;
  for (size_t j = 0; j < n; ++j) {
    out[j] = std::exp(x[j] - mx);
    z += out[j];
  }
  for (size_t j = 0; j < n; ++j) out[j] /= z;
  return mx + std::log(z);
}

}  // namespace

DiffArray MatMul(const DiffArray& a, const DiffArray& b) {
  LSVG_CHECK(a.cols() == b.rows(), "MatMul: inner dimension mismatch " +
                                       a.shape().ToString() + " * " +
                                       b.shape().ToString());
  const size_t n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<double> out(n * m, 0.0);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (size_t i = 0; i < n; ++i) {
    double* orow = &out[i * m];
    for (size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * m];
      for (size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
  DiffArray o = DiffArray::FromOp({n, m}, std::move(out), {a, b});
  Node* on = o.node();
  Node* an = a.node();
  Node* bn = b.node();
  o.SetBackward([on, an, bn, n, k, m] {
    const double* g = on->grad.data();
    if (an->requires_grad) {
      // da = g * b^T
      for (size_t i = 0; i < n; ++i) {
        for (size_t p = 0; p < k; ++p) {
          const double* brow = &bn->value[p * m];
          double s = 0.0;
          for (size_t j = 0; j < m; ++j) s += g[i * m + j] * brow[j];
          an->grad[i * k + p] += s;
        }
      }
    }
    if (bn->requires_grad) {
      // db = a^T * g
      for (size_t i = 0; i < n; ++i) {
        const double* grow = &g[i * m];
        for (size_t p = 0; p < k; ++p) {
          const double aip = an->value[i * k + p];
          if (aip == 0.0) continue;
          double* dbrow = &bn->grad[p * m];
          for (size_t j = 0; j < m; ++j) dbrow[j] += aip * grow[j];
        }
      }
    }
  });
  return o;
}

DiffArray MatMulNT(const DiffArray& a, const DiffArray& b) {
  LSVG_CHECK(a.cols() == b.cols(), "MatMulNT: inner dimension mismatch " +
                                       a.shape().ToString() + " * " +
                                       b.shape().ToString() + "^T");
  const size_t n = a.rows(), k = a.cols(), m = b.rows();
  std::vector<double> out(n * m, 0.0);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (size_t p = 0; p < k; ++p) s += av[i * k + p] * bv[j * k + p];
      out[i * m + j] = s;
    }
  }
  DiffArray o = DiffArray::FromOp({n, m}, std::move(out), {a, b});
  Node* on = o.node();
  Node* an = a.node();
  Node* bn = b.node();
  o.SetBackward([on, an, bn, n, k, m] {
    const double* g = on->grad.data();
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < m; ++j) {
        const double gij = g[i * m + j];
        if (gij == 0.0) continue;
        if (an->requires_grad) {
          for (size_t p = 0; p < k; ++p)
            an->grad[i * k + p] += gij * bn->value[j * k + p];
        }
        if (bn->requires_grad) {
          for (size_t p = 0; p < k; ++p)
            bn->grad[j * k + p] += gij * an->value[i * k + p];
        }
      }
    }
  });
  return o;
}

DiffArray Transpose(const DiffArray& a) {
  const size_t n = a.rows(), m = a.cols();
  std::vector<double> out(n * m);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < m; ++j) out[j * n + i] = a.values()[i * m + j];
  DiffArray o = DiffArray::FromOp({m, n}, std::move(out), {a});
  Node* on = o.node();
  Node* an = a.node();
  o.SetBackward([on, an, n, m] {
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < m; ++j)
        an->grad[i * m + j] += on->grad[j * n + i];
  });
  return o;
}

DiffArray Add(const DiffArray& a, const DiffArray& b) {
  CheckSameShape(a, b, "Add");
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  DiffArray o = DiffArray::FromOp(a.shape(), std::move(out), {a, b});
  Node* on = o.node();
  Node* an = a.node();
  Node* bn = b.node();
  o.SetBackward([on, an, bn] {
    for (size_t i = 0; i < on->grad.size(); ++i) {
      if (an->requires_grad) an->grad[i] += on->grad[i];
      if (bn->requires_grad) bn->grad[i] += on->grad[i];
    }
  });
  return o;
}

DiffArray Sub(const DiffArray& a, const DiffArray& b) {
  CheckSameShape(a, b, "Sub");
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  DiffArray o = DiffArray::FromOp(a.shape(), std::move(out), {a, b});
  Node* on = o.node();
  Node* an = a.node();
  Node* bn = b.node();
  o.SetBackward([on, an, bn] {
    for (size_t i = 0; i < on->grad.size(); ++i) {
      if (an->requires_grad) an->grad[i] += on->grad[i];
      if (bn->requires_grad) bn->grad[i] -= on->grad[i];
    }
  });
  return o;
}

DiffArray Mul(const DiffArray& a, const DiffArray& b) {
  CheckSameShape(a, b, "Mul");
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  DiffArray o = DiffArray::FromOp(a.shape(), std::move(out), {a, b});
  Node* on = o.node();
  Node* an = a.node();
  Node* bn = b.node();
  o.SetBackward([on, an, bn] {
    for (size_t i = 0; i < on->grad.size(); ++i) {
      if (an->requires_grad) an->grad[i] += on->grad[i] * bn->value[i];
      if (bn->requires_grad) bn->grad[i] += on->grad[i] * an->value[i];
    }
  });
  return o;
}

DiffArray AddRowBroadcast(const DiffArray& a, const DiffArray& row) {
  LSVG_CHECK(row.rows() == 1 && row.cols() == a.cols(),
             "AddRowBroadcast: row " + row.shape().ToString() +
                 " does not match " + a.shape().ToString());
  const size_t n = a.rows(), m = a.cols();
  std::vector<double> out(a.size());
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < m; ++j)
      out[i * m + j] = a.values()[i * m + j] + row.values()[j];
  DiffArray o = DiffArray::FromOp(a.shape(), std::move(out), {a, row});
  Node* on = o.node();
  Node* an = a.node();
  Node* rn = row.node();
  o.SetBackward([on, an, rn, n, m] {
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < m; ++j) {
        const double g = on->grad[i * m + j];
        if (an->requires_grad) an->grad[i * m + j] += g;
        if (rn->requires_grad) rn->grad[j] += g;
      }
    }
  });
  return o;
}

DiffArray Scale(const DiffArray& a, double s) {
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * s;
  DiffArray o = DiffArray::FromOp(a.shape(), std::move(out), {a});
  Node* on = o.node();
  Node* an = a.node();
  o.SetBackward([on, an, s] {
    for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * s;
  });
  return o;
}

DiffArray ScaleBy(const DiffArray& a, const DiffArray& s) {
  LSVG_CHECK(s.size() == 1, "ScaleBy: scale must be 1x1");
  const double sv = s.values()[0];
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * sv;
  DiffArray o = DiffArray::FromOp(a.shape(), std::move(out), {a, s});
  Node* on = o.node();
  Node* an = a.node();
  Node* sn = s.node();
  o.SetBackward([on, an, sn] {
    const double sv = sn->value[0];
    double gs = 0.0;
    for (size_t i = 0; i < on->grad.size(); ++i) {
      if (an->requires_grad) an->grad[i] += on->grad[i] * sv;
      gs += on->grad[i] * an->value[i];
    }
    if (sn->requires_grad) sn->grad[0] += gs;
  });
  return o;
}

DiffArray LeakyRelu(const DiffArray& a, double slope) {
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double x = a.values()[i];
    out[i] = x > 0.0 ? x : slope * x;
  }
  DiffArray o = DiffArray::FromOp(a.shape(), std::move(out), {a});
  Node* on = o.node();
  Node* an = a.node();
  o.SetBackward([on, an, slope] {
    for (size_t i = 0; i < on->grad.size(); ++i)
      an->grad[i] += an->value[i] > 0.0 ? on->grad[i] : slope * on->grad[i];
  });
  return o;
}

DiffArray Relu(const DiffArray& a) { return LeakyRelu(a, 0.0); }

DiffArray Exp(const DiffArray& a) {
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.values()[i]);
  DiffArray o = DiffArray::FromOp(a.shape(), std::move(out), {a});
  Node* on = o.node();
  Node* an = a.node();
  o.SetBackward([on, an] {
    for (size_t i = 0; i < on->grad.size(); ++i)
      an->grad[i] += on->grad[i] * on->value[i];
  });
  return o;
}

DiffArray SoftmaxRows(const DiffArray& a) {
  LSVG_CHECK(a.cols() > 0, "SoftmaxRows: empty axis");
  const size_t n = a.rows(), m = a.cols();
  std::vector<double> out(a.size());
  for (size_t i = 0; i < n; ++i)
    RowSoftmax(&a.values()[i * m], m, &out[i * m]);
  DiffArray o = DiffArray::FromOp(a.shape(), std::move(out), {a});
  Node* on = o.node();
  Node* an = a.node();
  o.SetBackward([on, an, n, m] {
    for (size_t i = 0; i < n; ++i) {
      const double* y = &on->value[i * m];
      const double* g = &on->grad[i * m];
      double dot = 0.0;
      for (size_t j = 0; j < m; ++j) dot += g[j] * y[j];
      for (size_t j = 0; j < m; ++j) an->grad[i * m + j] += y[j] * (g[j] - dot);
    }
  });
  return o;
}

DiffArray LogSoftmaxRows(const DiffArray& a) {
  LSVG_CHECK(a.cols() > 0, "LogSoftmaxRows: empty axis");
  const size_t n = a.rows(), m = a.cols();
  std::vector<double> out(a.size());
  std::vector<double> soft(a.size());
  for (size_t i = 0; i < n; ++i) {
    const double lz = RowSoftmax(&a.values()[i * m], m, &soft[i * m]);
    for (size_t j = 0; j < m; ++j) out[i * m + j] = a.values()[i * m + j] - lz;
  }
  DiffArray o = DiffArray::FromOp(a.shape(), std::move(out), {a});
  Node* on = o.node();
  Node* an = a.node();
  o.SetBackward([on, an, n, m, soft = std::move(soft)] {
    for (size_t i = 0; i < n; ++i) {
      double gsum = 0.0;
      for (size_t j = 0; j < m; ++j) gsum += on->grad[i * m + j];
      for (size_t j = 0; j < m; ++j)
        an->grad[i * m + j] += on->grad[i * m + j] - soft[i * m + j] * gsum;
    }
  });
  return o;
}

DiffArray MaskedSoftmaxRows(const DiffArray& a, std::span<const uint8_t> mask) {
  LSVG_CHECK(mask.size() == a.size(), "MaskedSoftmaxRows: mask size mismatch");
  const size_t n = a.rows(), m = a.cols();
  std::vector<double> out(a.size(), 0.0);
  for (size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (size_t j = 0; j < m; ++j) {
      if (mask[i * m + j]) {
        mx = std::max(mx, a.values()[i * m + j]);
        any = true;
      }
    }
    if (!any) continue;
    double z = 0.0;
    for (size_t j = 0; j < m; ++j) {
      if (!mask[i * m + j]) continue;
      out[i * m + j] = std::exp(a.values()[i * m + j] - mx);
      z += out[i * m + j];
    }
    for (size_t j = 0; j < m; ++j) out[i * m + j] /= z;
  }
  DiffArray o = DiffArray::FromOp(a.shape(), std::move(out), {a});
  Node* on = o.node();
  Node* an = a.node();
  o.SetBackward([on, an, n, m] {
    // Masked entries have y = 0 so they receive no gradient.
    for (size_t i = 0; i < n; ++i) {
      const double* y = &on->value[i * m];
      const double* g = &on->grad[i * m];
      double dot = 0.0;
      for (size_t j = 0; j < m; ++j) dot += g[j] * y[j];
      for (size_t j = 0; j < m; ++j) an->grad[i * m + j] += y[j] * (g[j] - dot);
    }
  });
  return o;
}

DiffArray CrossEntropy(const DiffArray& logits, std::span<const size_t> targets) {
  const size_t n = logits.rows(), m = logits.cols();
  LSVG_CHECK(m > 0, "CrossEntropy: empty class axis");
  LSVG_CHECK(targets.size() == n, "CrossEntropy: one target per row required");
  std::vector<double> soft(logits.size());
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    LSVG_CHECK(targets[i] < m, "CrossEntropy: target out of range");
    const double lz = RowSoftmax(&logits.values()[i * m], m, &soft[i * m]);
    loss += lz - logits.values()[i * m + targets[i]];
  }
  loss /= static_cast<double>(n);
  DiffArray o = DiffArray::FromOp({1, 1}, {loss}, {logits});
  Node* on = o.node();
  Node* ln = logits.node();
  std::vector<size_t> t(targets.begin(), targets.end());
  o.SetBackward([on, ln, n, m, soft = std::move(soft), t = std::move(t)] {
    const double g = on->grad[0] / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < m; ++j) {
        const double onehot = j == t[i] ? 1.0 : 0.0;
        ln->grad[i * m + j] += g * (soft[i * m + j] - onehot);
      }
    }
  });
  return o;
}

DiffArray Sum(const DiffArray& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  DiffArray o = DiffArray::FromOp({1, 1}, {s}, {a});
  Node* on = o.node();
  Node* an = a.node();
  o.SetBackward([on, an] {
    for (double& g : an->grad) g += on->grad[0];
  });
  return o;
}

DiffArray Mean(const DiffArray& a) {
  LSVG_CHECK(a.size() > 0, "Mean: empty array");
  return Scale(Sum(a), 1.0 / static_cast<double>(a.size()));
}

DiffArray MeanRows(const DiffArray& a) {
  LSVG_CHECK(a.rows() > 0, "MeanRows: no rows");
  const size_t n = a.rows(), m = a.cols();
  std::vector<double> out(m, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < m; ++j) out[j] += a.values()[i * m + j];
  for (double& v : out) v /= static_cast<double>(n);
  DiffArray o = DiffArray::FromOp({1, m}, std::move(out), {a});
  Node* on = o.node();
  Node* an = a.node();
  o.SetBackward([on, an, n, m] {
    const double inv = 1.0 / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < m; ++j) an->grad[i * m + j] += on->grad[j] * inv;
  });
  return o;
}

DiffArray ConcatCols(const std::vector<DiffArray>& parts) {
  LSVG_CHECK(!parts.empty(), "ConcatCols: no inputs");
  const size_t n = parts[0].rows();
  size_t m = 0;
  for (const auto& p : parts) {
    LSVG_CHECK(p.rows() == n, "ConcatCols: row count mismatch");
    m += p.cols();
  }
  std::vector<double> out(n * m);
  std::vector<size_t> offsets;
  size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    for (size_t i = 0; i < n; ++i)
      std::copy_n(&p.values()[i * p.cols()], p.cols(), &out[i * m + off]);
    off += p.cols();
  }
  DiffArray o = DiffArray::FromOp({n, m}, std::move(out), parts);
  Node* on = o.node();
  std::vector<Node*> pn;
  for (const auto& p : parts) pn.push_back(p.node());
  o.SetBackward([on, pn = std::move(pn), offsets = std::move(offsets), n, m] {
    for (size_t k = 0; k < pn.size(); ++k) {
      Node* p = pn[k];
      if (!p->requires_grad) continue;
      const size_t c = p->shape.cols;
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < c; ++j)
          p->grad[i * c + j] += on->grad[i * m + offsets[k] + j];
    }
  });
  return o;
}

DiffArray ConcatRows(const std::vector<DiffArray>& parts) {
  LSVG_CHECK(!parts.empty(), "ConcatRows: no inputs");
  const size_t m = parts[0].cols();
  size_t n = 0;
  for (const auto& p : parts) {
    LSVG_CHECK(p.cols() == m, "ConcatRows: column count mismatch");
    n += p.rows();
  }
  std::vector<double> out;
  out.reserve(n * m);
  for (const auto& p : parts)
    out.insert(out.end(), p.values().begin(), p.values().end());
  DiffArray o = DiffArray::FromOp({n, m}, std::move(out), parts);
  Node* on = o.node();
  std::vector<Node*> pn;
  for (const auto& p : parts) pn.push_back(p.node());
  o.SetBackward([on, pn = std::move(pn)] {
    size_t off = 0;
    for (Node* p : pn) {
      if (p->requires_grad)
        for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += on->grad[off + i];
      off += p->value.size();
    }
  });
  return o;
}

DiffArray SliceCols(const DiffArray& a, size_t begin, size_t count) {
  LSVG_CHECK(begin + count <= a.cols(), "SliceCols: range out of bounds");
  const size_t n = a.rows(), m = a.cols();
  std::vector<double> out(n * count);
  for (size_t i = 0; i < n; ++i)
    std::copy_n(&a.values()[i * m + begin], count, &out[i * count]);
  DiffArray o = DiffArray::FromOp({n, count}, std::move(out), {a});
  Node* on = o.node();
  Node* an = a.node();
  o.SetBackward([on, an, n, m, begin, count] {
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < count; ++j)
        an->grad[i * m + begin + j] += on->grad[i * count + j];
  });
  return o;
}

DiffArray SliceRows(const DiffArray& a, size_t begin, size_t count) {
  LSVG_CHECK(begin + count <= a.rows(), "SliceRows: range out of bounds");
  const size_t m = a.cols();
  std::vector<double> out(a.values().begin() + begin * m,
                          a.values().begin() + (begin + count) * m);
  DiffArray o = DiffArray::FromOp({count, m}, std::move(out), {a});
  Node* on = o.node();
  Node* an = a.node();
  o.SetBackward([on, an, begin, m] {
    for (size_t i = 0; i < on->grad.size(); ++i)
      an->grad[begin * m + i] += on->grad[i];
  });
  return o;
}

DiffArray GatherRows(const DiffArray& a, std::span<const size_t> index) {
  const size_t m = a.cols();
  std::vector<double> out(index.size() * m);
  for (size_t i = 0; i < index.size(); ++i) {
    LSVG_CHECK(index[i] < a.rows(), "GatherRows: index out of range");
    std::copy_n(&a.values()[index[i] * m], m, &out[i * m]);
  }
  DiffArray o = DiffArray::FromOp({index.size(), m}, std::move(out), {a});
  Node* on = o.node();
  Node* an = a.node();
  std::vector<size_t> idx(index.begin(), index.end());
  o.SetBackward([on, an, m, idx = std::move(idx)] {
    for (size_t i = 0; i < idx.size(); ++i)
      for (size_t j = 0; j < m; ++j) an->grad[idx[i] * m + j] += on->grad[i * m + j];
  });
  return o;
}

DiffArray ReplaceRows(const DiffArray& base, std::span<const size_t> index,
                      const DiffArray& rows) {
  LSVG_CHECK(rows.cols() == base.cols() && rows.rows() == index.size(),
             "ReplaceRows: shape mismatch");
  const size_t m = base.cols();
  std::vector<double> out(base.values().begin(), base.values().end());
  std::vector<uint8_t> replaced(base.rows(), 0);
  for (size_t i = 0; i < index.size(); ++i) {
    LSVG_CHECK(index[i] < base.rows(), "ReplaceRows: index out of range");
    LSVG_CHECK(!replaced[index[i]], "ReplaceRows: duplicate index");
    replaced[index[i]] = 1;
    std::copy_n(&rows.values()[i * m], m, &out[index[i] * m]);
  }
  DiffArray o = DiffArray::FromOp(base.shape(), std::move(out), {base, rows});
  Node* on = o.node();
  Node* bn = base.node();
  Node* rn = rows.node();
  std::vector<size_t> idx(index.begin(), index.end());
  o.SetBackward([on, bn, rn, m, idx = std::move(idx),
                 replaced = std::move(replaced)] {
    if (bn->requires_grad) {
      for (size_t r = 0; r < replaced.size(); ++r) {
        if (replaced[r]) continue;
        for (size_t j = 0; j < m; ++j) bn->grad[r * m + j] += on->grad[r * m + j];
      }
    }
    if (rn->requires_grad) {
      for (size_t i = 0; i < idx.size(); ++i)
        for (size_t j = 0; j < m; ++j) rn->grad[i * m + j] += on->grad[idx[i] * m + j];
    }
  });
  return o;
}

DiffArray MaxPoolGroups(const DiffArray& a, std::span<const size_t> offsets,
                        std::span<const size_t> members) {
  LSVG_CHECK(offsets.size() >= 1 && offsets.back() == members.size(),
             "MaxPoolGroups: offsets do not cover members");
  const size_t groups = offsets.size() - 1;
  const size_t m = a.cols();
  std::vector<double> out(groups * m);
  std::vector<size_t> arg(groups * m);
  for (size_t g = 0; g < groups; ++g) {
    LSVG_CHECK(offsets[g] < offsets[g + 1], "MaxPoolGroups: empty group");
    for (size_t j = 0; j < m; ++j) {
      size_t best = members[offsets[g]];
      LSVG_CHECK(best < a.rows(), "MaxPoolGroups: member out of range");
      double bv = a.values()[best * m + j];
      for (size_t t = offsets[g] + 1; t < offsets[g + 1]; ++t) {
        const size_t r = members[t];
        const double v = a.values()[r * m + j];
        if (v > bv) {
          bv = v;
          best = r;
        }
      }
      out[g * m + j] = bv;
      arg[g * m + j] = best;
    }
  }
  DiffArray o = DiffArray::FromOp({groups, m}, std::move(out), {a});
  Node* on = o.node();
  Node* an = a.node();
  o.SetBackward([on, an, m, arg = std::move(arg)] {
    for (size_t i = 0; i < arg.size(); ++i)
      an->grad[arg[i] * m + i % m] += on->grad[i];
  });
  return o;
}

DiffArray PairwiseAdd(const DiffArray& u, const DiffArray& v) {
  LSVG_CHECK(u.cols() == 1 && v.cols() == 1, "PairwiseAdd: expects columns");
  const size_t n = u.rows(), m = v.rows();
  std::vector<double> out(n * m);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < m; ++j) out[i * m + j] = u.values()[i] + v.values()[j];
  DiffArray o = DiffArray::FromOp({n, m}, std::move(out), {u, v});
  Node* on = o.node();
  Node* un = u.node();
  Node* vn = v.node();
  o.SetBackward([on, un, vn, n, m] {
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < m; ++j) {
        const double g = on->grad[i * m + j];
        if (un->requires_grad) un->grad[i] += g;
        if (vn->requires_grad) vn->grad[j] += g;
      }
    }
  });
  return o;
}

DiffArray L2NormalizeRows(const DiffArray& a, double eps) {
  const size_t n = a.rows(), m = a.cols();
  std::vector<double> out(a.size());
  std::vector<double> norms(n);
  for (size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < m; ++j) s += a.values()[i * m + j] * a.values()[i * m + j];
    norms[i] = std::sqrt(s + eps);
    for (size_t j = 0; j < m; ++j) out[i * m + j] = a.values()[i * m + j] / norms[i];
  }
  DiffArray o = DiffArray::FromOp(a.shape(), std::move(out), {a});
  Node* on = o.node();
  Node* an = a.node();
  o.SetBackward([on, an, n, m, norms = std::move(norms)] {
    for (size_t i = 0; i < n; ++i) {
      const double* y = &on->value[i * m];
      const double* g = &on->grad[i * m];
      double dot = 0.0;
      for (size_t j = 0; j < m; ++j) dot += y[j] * g[j];
      for (size_t j = 0; j < m; ++j)
        an->grad[i * m + j] += (g[j] - y[j] * dot) / norms[i];
    }
  });
  return o;
}

DiffArray LayerNormRows(const DiffArray& a, const DiffArray& gain,
                        const DiffArray& bias, double eps) {
  const size_t n = a.rows(), m = a.cols();
  LSVG_CHECK(gain.rows() == 1 && gain.cols() == m && bias.shape() == gain.shape(),
             "LayerNormRows: gain/bias must be 1 x " + std::to_string(m));
  std::vector<double> out(a.size());
  std::vector<double> xhat(a.size());
  std::vector<double> inv(n);
  for (size_t i = 0; i < n; ++i) {
    const double* x = &a.values()[i * m];
    double mu = 0.0;
    for (size_t j = 0; j < m; ++j) mu += x[j];
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (size_t j = 0; j < m; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<double>(m);
    inv[i] = 1.0 / std::sqrt(var + eps);
    for (size_t j = 0; j < m; ++j) {
      xhat[i * m + j] = (x[j] - mu) * inv[i];
      out[i * m + j] = xhat[i * m + j] * gain.values()[j] + bias.values()[j];
    }
  }
  DiffArray o = DiffArray::FromOp(a.shape(), std::move(out), {a, gain, bias});
  Node* on = o.node();
  Node* an = a.node();
  Node* gn = gain.node();
  Node* bn = bias.node();
  o.SetBackward([on, an, gn, bn, n, m, xhat = std::move(xhat),
                 inv = std::move(inv)] {
    std::vector<double> dxhat(m);
    for (size_t i = 0; i < n; ++i) {
      const double* g = &on->grad[i * m];
      const double* xh = &xhat[i * m];
      double sum = 0.0, sum_xh = 0.0;
      for (size_t j = 0; j < m; ++j) {
        if (gn->requires_grad) gn->grad[j] += g[j] * xh[j];
        if (bn->requires_grad) bn->grad[j] += g[j];
        dxhat[j] = g[j] * gn->value[j];
        sum += dxhat[j];
        sum_xh += dxhat[j] * xh[j];
      }
      if (!an->requires_grad) continue;
      const double md = static_cast<double>(m);
      for (size_t j = 0; j < m; ++j)
        an->grad[i * m + j] += inv[i] / md * (md * dxhat[j] - sum - xh[j] * sum_xh);
    }
  });
  return o;
}

}  // namespace lsvg::ops
