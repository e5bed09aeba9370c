# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled hot-kernel backend.

Thin numpy-interop layer over the C implementations in _kernelimpl.c, which
hold the fused single-pass loops (causal softmax, softmax cross-entropy,
GELU, LayerNorm, AdamW, embedding-gradient scatter). Matrix products are not
here; BLAS already owns those. The C loops assign each output row to exactly
one thread, so results do not depend on the OpenMP thread count.
"""

import numpy as np


cdef extern from "_kernelimpl.h" nogil:
    void prelude_causal_softmax_f32(const float *scores, float *out, long n, long T)
    void prelude_causal_softmax_f64(const double *scores, double *out, long n, long T)
    void prelude_causal_softmax_bwd_f32(const float *probs, const float *dprobs,
                                        float *ds, long n, long T)
    void prelude_causal_softmax_bwd_f64(const double *probs, const double *dprobs,
                                        double *ds, long n, long T)
    long prelude_softmax_xent_f32(const float *logits, const long long *targets,
                                  long long ignore_id, float *dl, double *loss_rows,
                                  long N, long V)
    long prelude_softmax_xent_f64(const double *logits, const long long *targets,
                                  long long ignore_id, double *dl, double *loss_rows,
                                  long N, long V)
    void prelude_gelu_f32(const float *x, float *y, long n)
    void prelude_gelu_f64(const double *x, double *y, long n)
    void prelude_gelu_bwd_f32(const float *x, const float *dy, float *dx, long n)
    void prelude_gelu_bwd_f64(const double *x, const double *dy, double *dx, long n)
    void prelude_layer_norm_f32(const float *x, const float *gamma, const float *beta,
                                double eps, float *y, float *mean, float *rstd,
                                long N, long d)
    void prelude_layer_norm_f64(const double *x, const double *gamma, const double *beta,
                                double eps, double *y, double *mean, double *rstd,
                                long N, long d)
    void prelude_layer_norm_bwd_x_f32(const float *x, const float *gamma,
                                      const float *mean, const float *rstd,
                                      const float *dy, float *dx, long N, long d)
    void prelude_layer_norm_bwd_x_f64(const double *x, const double *gamma,
                                      const double *mean, const double *rstd,
                                      const double *dy, double *dx, long N, long d)
    void prelude_adamw_f32(float *p, const float *g, float *m, float *v,
                           double lr, double beta1, double beta2, double eps,
                           double weight_decay, long long step, long n)
    void prelude_adamw_f64(double *p, const double *g, double *m, double *v,
                           double lr, double beta1, double beta2, double eps,
                           double weight_decay, long long step, long n)
    void prelude_index_add_f32(float *out, const long long *idx, const float *grads,
                               long N, long d)
    void prelude_index_add_f64(double *out, const long long *idx, const double *grads,
                               long N, long d)


ctypedef fused floating:
    float
    double

NAME = "cython"


def causal_softmax(floating[:, :, ::1] scores, out_np=None):
    cdef long n = scores.shape[0]
    cdef long T = scores.shape[1]
    if out_np is None:
        if floating is float:
            out_np = np.empty((n, T, T), dtype=np.float32)
        else:
            out_np = np.empty((n, T, T), dtype=np.float64)
    cdef floating[:, :, ::1] out = out_np
    if n == 0 or T == 0:
        return out_np
    with nogil:
        if floating is float:
            prelude_causal_softmax_f32(&scores[0, 0, 0], <float *> &out[0, 0, 0], n, T)
        else:
            prelude_causal_softmax_f64(&scores[0, 0, 0], <double *> &out[0, 0, 0], n, T)
    return out_np


def causal_softmax_backward(floating[:, :, ::1] probs, floating[:, :, ::1] dprobs,
                            out_np=None):
    cdef long n = probs.shape[0]
    cdef long T = probs.shape[1]
    if out_np is None:
        if floating is float:
            out_np = np.empty((n, T, T), dtype=np.float32)
        else:
            out_np = np.empty((n, T, T), dtype=np.float64)
    cdef floating[:, :, ::1] ds = out_np
    if n == 0 or T == 0:
        return out_np
    with nogil:
        if floating is float:
            prelude_causal_softmax_bwd_f32(&probs[0, 0, 0], &dprobs[0, 0, 0],
                                           <float *> &ds[0, 0, 0], n, T)
        else:
            prelude_causal_softmax_bwd_f64(&probs[0, 0, 0], &dprobs[0, 0, 0],
                                           <double *> &ds[0, 0, 0], n, T)
    return out_np


def softmax_xent(floating[:, ::1] logits, long long[::1] targets, long long ignore_id,
                 dl_np=None):
    cdef long N = logits.shape[0]
    cdef long V = logits.shape[1]
    if dl_np is None:
        if floating is float:
            dl_np = np.empty((N, V), dtype=np.float32)
        else:
            dl_np = np.empty((N, V), dtype=np.float64)
    loss_np = np.zeros(N, dtype=np.float64)
    cdef floating[:, ::1] dl = dl_np
    cdef double[::1] loss = loss_np
    cdef long count = 0
    if N == 0 or V == 0:
        return 0.0, 0, dl_np
    with nogil:
        if floating is float:
            count = prelude_softmax_xent_f32(&logits[0, 0], &targets[0], ignore_id,
                                             <float *> &dl[0, 0], &loss[0], N, V)
        else:
            count = prelude_softmax_xent_f64(&logits[0, 0], &targets[0], ignore_id,
                                             <double *> &dl[0, 0], &loss[0], N, V)
    return float(loss_np.sum()), int(count), dl_np


def gelu(floating[::1] x):
    cdef long n = x.shape[0]
    if floating is float:
        out_np = np.empty(n, dtype=np.float32)
    else:
        out_np = np.empty(n, dtype=np.float64)
    cdef floating[::1] y = out_np
    if n == 0:
        return out_np
    with nogil:
        if floating is float:
            prelude_gelu_f32(&x[0], <float *> &y[0], n)
        else:
            prelude_gelu_f64(&x[0], <double *> &y[0], n)
    return out_np


def gelu_backward(floating[::1] x, floating[::1] dy):
    cdef long n = x.shape[0]
    if floating is float:
        out_np = np.empty(n, dtype=np.float32)
    else:
        out_np = np.empty(n, dtype=np.float64)
    cdef floating[::1] dx = out_np
    if n == 0:
        return out_np
    with nogil:
        if floating is float:
            prelude_gelu_bwd_f32(&x[0], &dy[0], <float *> &dx[0], n)
        else:
            prelude_gelu_bwd_f64(&x[0], &dy[0], <double *> &dx[0], n)
    return out_np


def layer_norm(floating[:, ::1] x, floating[::1] gamma, floating[::1] beta, double eps):
    cdef long N = x.shape[0]
    cdef long d = x.shape[1]
    if floating is float:
        y_np = np.empty((N, d), dtype=np.float32)
        mean_np = np.empty(N, dtype=np.float32)
        rstd_np = np.empty(N, dtype=np.float32)
    else:
        y_np = np.empty((N, d), dtype=np.float64)
        mean_np = np.empty(N, dtype=np.float64)
        rstd_np = np.empty(N, dtype=np.float64)
    cdef floating[:, ::1] y = y_np
    cdef floating[::1] mean = mean_np
    cdef floating[::1] rstd = rstd_np
    if N == 0 or d == 0:
        return y_np, mean_np, rstd_np
    with nogil:
        if floating is float:
            prelude_layer_norm_f32(&x[0, 0], &gamma[0], &beta[0], eps,
                                   <float *> &y[0, 0], <float *> &mean[0],
                                   <float *> &rstd[0], N, d)
        else:
            prelude_layer_norm_f64(&x[0, 0], &gamma[0], &beta[0], eps,
                                   <double *> &y[0, 0], <double *> &mean[0],
                                   <double *> &rstd[0], N, d)
    return y_np, mean_np, rstd_np


def layer_norm_backward_x(floating[:, ::1] x, floating[::1] gamma,
                          floating[::1] mean, floating[::1] rstd,
                          floating[:, ::1] dy):
    cdef long N = x.shape[0]
    cdef long d = x.shape[1]
    if floating is float:
        out_np = np.empty((N, d), dtype=np.float32)
    else:
        out_np = np.empty((N, d), dtype=np.float64)
    cdef floating[:, ::1] dx = out_np
    if N == 0 or d == 0:
        return out_np
    with nogil:
        if floating is float:
            prelude_layer_norm_bwd_x_f32(&x[0, 0], &gamma[0], &mean[0], &rstd[0],
                                         &dy[0, 0], <float *> &dx[0, 0], N, d)
        else:
            prelude_layer_norm_bwd_x_f64(&x[0, 0], &gamma[0], &mean[0], &rstd[0],
                                         &dy[0, 0], <double *> &dx[0, 0], N, d)
    return out_np


def adamw_update(floating[::1] p, floating[::1] g, floating[::1] m, floating[::1] v,
                 double lr, double beta1, double beta2, double eps,
                 double weight_decay, long long step):
    cdef long n = p.shape[0]
    if n == 0:
        return None
    with nogil:
        if floating is float:
            prelude_adamw_f32(<float *> &p[0], &g[0], <float *> &m[0], <float *> &v[0],
                              lr, beta1, beta2, eps, weight_decay, step, n)
        else:
            prelude_adamw_f64(<double *> &p[0], &g[0], <double *> &m[0], <double *> &v[0],
                              lr, beta1, beta2, eps, weight_decay, step, n)
    return None


def index_add(floating[:, ::1] out, long long[::1] idx, floating[:, ::1] grads):
    cdef long N = idx.shape[0]
    cdef long d = out.shape[1]
    if N == 0 or d == 0:
        return None
    with nogil:
        if floating is float:
            prelude_index_add_f32(<float *> &out[0, 0], &idx[0], &grads[0, 0], N, d)
        else:
            prelude_index_add_f64(<double *> &out[0, 0], &idx[0], &grads[0, 0], N, d)
    return None
