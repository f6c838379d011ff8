#include "kgmc/tape.hpp"

#include "kgmc/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kgmc {

namespace {
constexpr double kBceClamp = 1e-7;
constexpr double kTeacherClamp = 1.0 - 1e-6;

void check_2d(const Tensor& t, const char* what) {
    if (t.shape.size() != 2) throw std::runtime_error(std::string(what) + ": expected rank-2 tensor");
}
}  // namespace

Var Tape::push(Tensor value, std::function<void(Tape&, int)> back) {
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(back)});
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Tensor value) { return push(std::move(value), nullptr); }

Var Tape::matmul(Var x, Var w) {
    const Tensor& a = val(x.id);
    const Tensor& b = val(w.id);
    check_2d(a, "matmul lhs");
    check_2d(b, "matmul rhs");
    const std::size_t B = a.shape[0], I = a.shape[1], O = b.shape[1];
    if (b.shape[0] != I) throw std::runtime_error("matmul: inner dims " + a.shape_str() + " vs " + b.shape_str());
    Tensor out({B, O});
    const auto& k = kern::ops();
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t i = 0; i < I; ++i) k.axpy(a.at(r, i), b.row(i), out.row(r), O);
    const int xa = x.id, wb = w.id;
    return push(std::move(out), [xa, wb, B, I, O](Tape& t, int self) {
        const Tensor& gout = t.g(self);
        const Tensor& a = t.val(xa);
        const Tensor& b = t.val(wb);
        Tensor& ga = t.g(xa);
        Tensor& gb = t.g(wb);
        const auto& k = kern::ops();
        for (std::size_t r = 0; r < B; ++r)
            for (std::size_t i = 0; i < I; ++i) {
                ga.at(r, i) += k.dot(gout.row(r), b.row(i), O);
                k.axpy(a.at(r, i), gout.row(r), gb.row(i), O);
            }
    });
}

Var Tape::matmul_nt(Var x, Var y) {
    const Tensor& a = val(x.id);
    const Tensor& b = val(y.id);
    check_2d(a, "matmul_nt lhs");
    check_2d(b, "matmul_nt rhs");
    const std::size_t B = a.shape[0], D = a.shape[1], G = b.shape[0];
    if (b.shape[1] != D) throw std::runtime_error("matmul_nt: dims " + a.shape_str() + " vs " + b.shape_str());
    Tensor out({B, G});
    const auto& k = kern::ops();
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t gidx = 0; gidx < G; ++gidx) out.at(r, gidx) = k.dot(a.row(r), b.row(gidx), D);
    const int xa = x.id, yb = y.id;
    return push(std::move(out), [xa, yb, B, D, G](Tape& t, int self) {
        const Tensor& gout = t.g(self);
        const Tensor& a = t.val(xa);
        const Tensor& b = t.val(yb);
        Tensor& ga = t.g(xa);
        Tensor& gb = t.g(yb);
        const auto& k = kern::ops();
        for (std::size_t r = 0; r < B; ++r)
            for (std::size_t gidx = 0; gidx < G; ++gidx) {
                const double go = gout.at(r, gidx);
                if (go == 0.0) continue;
                k.axpy(go, b.row(gidx), ga.row(r), D);
                k.axpy(go, a.row(r), gb.row(gidx), D);
            }
    });
}

Var Tape::add(Var a, Var b) {
    const Tensor& ta = val(a.id);
    const Tensor& tb = val(b.id);
    if (!ta.same_shape(tb)) throw std::runtime_error("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out = ta;
    kern::ops().add(tb.v.data(), out.v.data(), out.v.size());
    const int ia = a.id, ib = b.id;
    return push(std::move(out), [ia, ib](Tape& t, int self) {
        const Tensor& gout = t.g(self);
        kern::ops().add(gout.v.data(), t.g(ia).v.data(), gout.v.size());
        kern::ops().add(gout.v.data(), t.g(ib).v.data(), gout.v.size());
    });
}

Var Tape::sub(Var a, Var b) {
    const Tensor& ta = val(a.id);
    const Tensor& tb = val(b.id);
    if (!ta.same_shape(tb)) throw std::runtime_error("sub: shape mismatch");
    Tensor out = ta;
    kern::ops().axpy(-1.0, tb.v.data(), out.v.data(), out.v.size());
    const int ia = a.id, ib = b.id;
    return push(std::move(out), [ia, ib](Tape& t, int self) {
        const Tensor& gout = t.g(self);
        kern::ops().add(gout.v.data(), t.g(ia).v.data(), gout.v.size());
        kern::ops().axpy(-1.0, gout.v.data(), t.g(ib).v.data(), gout.v.size());
    });
}

Var Tape::mul(Var a, Var b) {
    const Tensor& ta = val(a.id);
    const Tensor& tb = val(b.id);
    if (!ta.same_shape(tb)) throw std::runtime_error("mul: shape mismatch");
    Tensor out(ta.shape);
    kern::ops().mul_acc(ta.v.data(), tb.v.data(), out.v.data(), out.v.size());
    const int ia = a.id, ib = b.id;
    return push(std::move(out), [ia, ib](Tape& t, int self) {
        const Tensor& gout = t.g(self);
        kern::ops().mul_acc(gout.v.data(), t.val(ib).v.data(), t.g(ia).v.data(), gout.v.size());
        kern::ops().mul_acc(gout.v.data(), t.val(ia).v.data(), t.g(ib).v.data(), gout.v.size());
    });
}

Var Tape::scale(Var x, double c) {
    Tensor out = val(x.id);
    kern::ops().scale(out.v.data(), c, out.v.size());
    const int ix = x.id;
    return push(std::move(out), [ix, c](Tape& t, int self) {
        kern::ops().axpy(c, t.g(self).v.data(), t.g(ix).v.data(), t.g(self).v.size());
    });
}

Var Tape::add_rowvec(Var x, Var b) {
    const Tensor& tx = val(x.id);
    const Tensor& tb = val(b.id);
    check_2d(tx, "add_rowvec");
    const std::size_t B = tx.shape[0], D = tx.shape[1];
    if (tb.count() != D) throw std::runtime_error("add_rowvec: bias width mismatch");
    Tensor out = tx;
    for (std::size_t r = 0; r < B; ++r) kern::ops().add(tb.v.data(), out.row(r), D);
    const int ix = x.id, ib = b.id;
    return push(std::move(out), [ix, ib, B, D](Tape& t, int self) {
        const Tensor& gout = t.g(self);
        kern::ops().add(gout.v.data(), t.g(ix).v.data(), gout.v.size());
        Tensor& gb = t.g(ib);
        for (std::size_t r = 0; r < B; ++r) kern::ops().add(gout.row(r), gb.v.data(), D);
    });
}

Var Tape::sigmoid(Var x) {
    Tensor out = val(x.id);
    for (double& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
    const int ix = x.id;
    return push(std::move(out), [ix](Tape& t, int self) {
        const Tensor& y = t.val(self);
        const Tensor& gout = t.g(self);
        Tensor& gx = t.g(ix);
        for (std::size_t i = 0; i < y.v.size(); ++i)
            gx.v[i] += gout.v[i] * y.v[i] * (1.0 - y.v[i]);
    });
}

Var Tape::sum(Var x) {
    const Tensor& tx = val(x.id);
    Tensor out = Tensor::scalar(kern::ops().sum(tx.v.data(), tx.v.size()));
    const int ix = x.id;
    return push(std::move(out), [ix](Tape& t, int self) {
        const double go = t.g(self).v[0];
        Tensor& gx = t.g(ix);
        for (double& v : gx.v) v += go;
    });
}

Var Tape::mean_rows(Var x) {
    const Tensor& tx = val(x.id);
    check_2d(tx, "mean_rows");
    const std::size_t B = tx.shape[0], D = tx.shape[1];
    Tensor out({B});
    for (std::size_t r = 0; r < B; ++r)
        out.v[r] = kern::ops().sum(tx.row(r), D) / static_cast<double>(D);
    const int ix = x.id;
    return push(std::move(out), [ix, B, D](Tape& t, int self) {
        const Tensor& gout = t.g(self);
        Tensor& gx = t.g(ix);
        for (std::size_t r = 0; r < B; ++r) {
            const double go = gout.v[r] / static_cast<double>(D);
            for (std::size_t d = 0; d < D; ++d) gx.at(r, d) += go;
        }
    });
}

Var Tape::rowwise_dot(Var a, Var b) {
    const Tensor& ta = val(a.id);
    const Tensor& tb = val(b.id);
    if (!ta.same_shape(tb)) throw std::runtime_error("rowwise_dot: shape mismatch");
    check_2d(ta, "rowwise_dot");
    const std::size_t B = ta.shape[0], D = ta.shape[1];
    Tensor out({B});
    for (std::size_t r = 0; r < B; ++r) out.v[r] = kern::ops().dot(ta.row(r), tb.row(r), D);
    const int ia = a.id, ib = b.id;
    return push(std::move(out), [ia, ib, B, D](Tape& t, int self) {
        const Tensor& gout = t.g(self);
        Tensor& ga = t.g(ia);
        Tensor& gb = t.g(ib);
        const Tensor& ta = t.val(ia);
        const Tensor& tb = t.val(ib);
        for (std::size_t r = 0; r < B; ++r) {
            kern::ops().axpy(gout.v[r], tb.row(r), ga.row(r), D);
            kern::ops().axpy(gout.v[r], ta.row(r), gb.row(r), D);
        }
    });
}

Var Tape::batchnorm_train(Var x, Var gain, Var bias, BnStats& running, double eps,
                          double momentum) {
    const Tensor& tx = val(x.id);
    check_2d(tx, "batchnorm");
    const std::size_t B = tx.shape[0], D = tx.shape[1];
    if (B < 2)
        throw std::runtime_error(
            "batchnorm: train mode needs a batch of >= 2; use eval mode for single samples");
    if (val(gain.id).count() != D || val(bias.id).count() != D || running.mean.size() != D)
        throw std::runtime_error("batchnorm: parameter width mismatch");

    std::vector<double> mu(D), inv_std(D);
    Tensor xhat({B, D});
    for (std::size_t d = 0; d < D; ++d) {
        double m = 0.0;
        for (std::size_t r = 0; r < B; ++r) m += tx.at(r, d);
        m /= static_cast<double>(B);
        double var = 0.0;
        for (std::size_t r = 0; r < B; ++r) {
            const double c = tx.at(r, d) - m;
            var += c * c;
        }
        var /= static_cast<double>(B);
        mu[d] = m;
        inv_std[d] = 1.0 / std::sqrt(var + eps);
        for (std::size_t r = 0; r < B; ++r) xhat.at(r, d) = (tx.at(r, d) - m) * inv_std[d];
        // running stats keep the unbiased variance
        const double unbiased = var * static_cast<double>(B) / static_cast<double>(B - 1);
        running.mean[d] = (1.0 - momentum) * running.mean[d] + momentum * m;
        running.var[d] = (1.0 - momentum) * running.var[d] + momentum * unbiased;
    }

    const Tensor& tg = val(gain.id);
    const Tensor& tb = val(bias.id);
    Tensor out({B, D});
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t d = 0; d < D; ++d) out.at(r, d) = tg.v[d] * xhat.at(r, d) + tb.v[d];

    const int ix = x.id, ig = gain.id, ibias = bias.id;
    return push(std::move(out),
                [ix, ig, ibias, B, D, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                    Tape& t, int self) {
                    const Tensor& gout = t.g(self);
                    const Tensor& tg = t.val(ig);
                    Tensor& gx = t.g(ix);
                    Tensor& ggain = t.g(ig);
                    Tensor& gbias = t.g(ibias);
                    const double invB = 1.0 / static_cast<double>(B);
                    for (std::size_t d = 0; d < D; ++d) {
                        double sum_dy = 0.0, sum_dy_xhat = 0.0;
                        for (std::size_t r = 0; r < B; ++r) {
                            const double dy = gout.at(r, d);
                            sum_dy += dy;
                            sum_dy_xhat += dy * xhat.at(r, d);
                        }
                        ggain.v[d] += sum_dy_xhat;
                        gbias.v[d] += sum_dy;
                        const double gscale = tg.v[d] * inv_std[d];
                        for (std::size_t r = 0; r < B; ++r) {
                            const double dxhat_scaled =
                                gout.at(r, d) - invB * sum_dy - invB * xhat.at(r, d) * sum_dy_xhat;
                            gx.at(r, d) += gscale * dxhat_scaled;
                        }
                    }
                });
}

Var Tape::batchnorm_eval(Var x, Var gain, Var bias, const BnStats& running, double eps) {
    const Tensor& tx = val(x.id);
    check_2d(tx, "batchnorm");
    const std::size_t B = tx.shape[0], D = tx.shape[1];
    if (val(gain.id).count() != D || running.mean.size() != D)
        throw std::runtime_error("batchnorm: parameter width mismatch");
    std::vector<double> inv_std(D);
    for (std::size_t d = 0; d < D; ++d) inv_std[d] = 1.0 / std::sqrt(running.var[d] + eps);
    const Tensor& tg = val(gain.id);
    const Tensor& tb = val(bias.id);
    Tensor out({B, D});
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t d = 0; d < D; ++d)
            out.at(r, d) = tg.v[d] * (tx.at(r, d) - running.mean[d]) * inv_std[d] + tb.v[d];
    const int ix = x.id, ig = gain.id, ibias = bias.id;
    std::vector<double> mean = running.mean;
    return push(std::move(out),
                [ix, ig, ibias, B, D, inv_std = std::move(inv_std), mean = std::move(mean)](
                    Tape& t, int self) {
                    const Tensor& gout = t.g(self);
                    const Tensor& tg = t.val(ig);
                    const Tensor& tx = t.val(ix);
                    Tensor& gx = t.g(ix);
                    Tensor& ggain = t.g(ig);
                    Tensor& gbias = t.g(ibias);
                    for (std::size_t d = 0; d < D; ++d) {
                        const double s = tg.v[d] * inv_std[d];
                        for (std::size_t r = 0; r < B; ++r) {
                            const double dy = gout.at(r, d);
                            gx.at(r, d) += dy * s;
                            ggain.v[d] += dy * (tx.at(r, d) - mean[d]) * inv_std[d];
                            gbias.v[d] += dy;
                        }
                    }
                });
}

Var Tape::bce_loss(Var probs, const Tensor& labels) {
    const Tensor& p = val(probs.id);
    if (!p.same_shape(labels)) throw std::runtime_error("bce_loss: probs/labels shape mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < p.v.size(); ++i) {
        const double pc = std::clamp(p.v[i], kBceClamp, 1.0 - kBceClamp);
        const double y = labels.v[i];
        loss -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
    }
    const int ip = probs.id;
    return push(Tensor::scalar(loss), [ip, labels](Tape& t, int self) {
        const double go = t.g(self).v[0];
        const Tensor& p = t.val(ip);
        Tensor& gp = t.g(ip);
        for (std::size_t i = 0; i < p.v.size(); ++i) {
            if (p.v[i] <= kBceClamp || p.v[i] >= 1.0 - kBceClamp) continue;  // clamped: flat
            const double y = labels.v[i];
            gp.v[i] += go * (-y / p.v[i] + (1.0 - y) / (1.0 - p.v[i]));
        }
    });
}

Var Tape::teacher_loss(Var a, const Tensor& targets) {
    const Tensor& ta = val(a.id);
    if (ta.count() != targets.count())
        throw std::runtime_error("teacher_loss: gate/target count mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < ta.v.size(); ++i) {
        const double gap = std::min(std::fabs(ta.v[i] - targets.v[i]), kTeacherClamp);
        loss -= std::log(1.0 - gap);
    }
    const int ia = a.id;
    return push(Tensor::scalar(loss), [ia, targets](Tape& t, int self) {
        const double go = t.g(self).v[0];
        const Tensor& ta = t.val(ia);
        Tensor& ga = t.g(ia);
        for (std::size_t i = 0; i < ta.v.size(); ++i) {
            const double diff = ta.v[i] - targets.v[i];
            const double gap = std::fabs(diff);
            if (gap >= kTeacherClamp) continue;  // clamped: flat
            const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            ga.v[i] += go * sgn / (1.0 - gap);
        }
    });
}

Var Tape::contrastive_loss(Var pos, Var negs, const std::vector<std::vector<int>>& neg_sets,
                           double tau) {
    const Tensor& tp = val(pos.id);
    const Tensor& tn = val(negs.id);
    const std::size_t B = tp.count();
    check_2d(tn, "contrastive_loss negs");
    if (tn.shape[0] != B || neg_sets.size() != B)
        throw std::runtime_error("contrastive_loss: batch size mismatch");
    if (tau <= 0.0) throw std::runtime_error("contrastive_loss: tau must be > 0");
    for (double v : tp.v)
        if (!std::isfinite(v)) throw std::runtime_error("contrastive_loss: non-finite similarity");

    // softmax weights per sample over {positive} + its negative set
    Tensor wpos({B});
    Tensor wneg(tn.shape);
    double loss = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        const double zp = tp.v[i] / tau;
        double m = zp;
        for (int g : neg_sets[i]) {
            const double zn = tn.at(i, static_cast<std::size_t>(g)) / tau;
            if (!std::isfinite(zn)) throw std::runtime_error("contrastive_loss: non-finite similarity");
            m = std::max(m, zn);
        }
        double denom = std::exp(zp - m);
        const double ep = denom;
        for (int g : neg_sets[i]) denom += std::exp(tn.at(i, static_cast<std::size_t>(g)) / tau - m);
        loss += -(zp - m) + std::log(denom);
        wpos.v[i] = ep / denom;
        for (int g : neg_sets[i])
            wneg.at(i, static_cast<std::size_t>(g)) =
                std::exp(tn.at(i, static_cast<std::size_t>(g)) / tau - m) / denom;
    }
    const int ip = pos.id, in = negs.id;
    return push(Tensor::scalar(loss),
                [ip, in, B, tau, wpos = std::move(wpos), wneg = std::move(wneg),
                 neg_sets](Tape& t, int self) {
                    const double go = t.g(self).v[0] / tau;
                    Tensor& gp = t.g(ip);
                    Tensor& gn = t.g(in);
                    for (std::size_t i = 0; i < B; ++i) {
                        gp.v[i] += go * (wpos.v[i] - 1.0);
                        for (int g : neg_sets[i])
                            gn.at(i, static_cast<std::size_t>(g)) +=
                                go * wneg.at(i, static_cast<std::size_t>(g));
                    }
                });
}

void Tape::backward(Var root) {
    if (!root.valid()) throw std::runtime_error("backward: invalid root");
    Node& r = nodes_[static_cast<std::size_t>(root.id)];
    if (r.value.count() != 1) throw std::runtime_error("backward: root must be scalar");
    for (auto& n : nodes_) {
        n.grad = Tensor(n.value.shape);
    }
    r.grad.v[0] = 1.0;
    for (int i = root.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.back) n.back(*this, i);
    }
}

}  // namespace kgmc
