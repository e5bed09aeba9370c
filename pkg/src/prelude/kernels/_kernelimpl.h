#ifndef PRELUDE_KERNELIMPL_H
#define PRELUDE_KERNELIMPL_H

/* C implementations of the hot kernels, in float and double variants.
 * All loops are arranged so each output row is produced by exactly one
 * thread; results are independent of the OpenMP thread count. */

void prelude_causal_softmax_f32(const float *scores, float *out, long n, long T);
void prelude_causal_softmax_f64(const double *scores, double *out, long n, long T);

void prelude_causal_softmax_bwd_f32(const float *probs, const float *dprobs,
                                    float *ds, long n, long T);
void prelude_causal_softmax_bwd_f64(const double *probs, const double *dprobs,
                                    double *ds, long n, long T);

long prelude_softmax_xent_f32(const float *logits, const long long *targets,
                              long long ignore_id, float *dl, double *loss_rows,
                              long N, long V);
long prelude_softmax_xent_f64(const double *logits, const long long *targets,
                              long long ignore_id, double *dl, double *loss_rows,
                              long N, long V);

void prelude_gelu_f32(const float *x, float *y, long n);
void prelude_gelu_f64(const double *x, double *y, long n);

void prelude_gelu_bwd_f32(const float *x, const float *dy, float *dx, long n);
void prelude_gelu_bwd_f64(const double *x, const double *dy, double *dx, long n);

void prelude_layer_norm_f32(const float *x, const float *gamma, const float *beta,
                            double eps, float *y, float *mean, float *rstd,
                            long N, long d);
void prelude_layer_norm_f64(const double *x, const double *gamma, const double *beta,
                            double eps, double *y, double *mean, double *rstd,
                            long N, long d);

void prelude_layer_norm_bwd_x_f32(const float *x, const float *gamma,
                                  const float *mean, const float *rstd,
                                  const float *dy, float *dx, long N, long d);
void prelude_layer_norm_bwd_x_f64(const double *x, const double *gamma,
                                  const double *mean, const double *rstd,
                                  const double *dy, double *dx, long N, long d);

void prelude_adamw_f32(float *p, const float *g, float *m, float *v,
                       double lr, double beta1, double beta2, double eps,
                       double weight_decay, long long step, long n);
void prelude_adamw_f64(double *p, const double *g, double *m, double *v,
                       double lr, double beta1, double beta2, double eps,
                       double weight_decay, long long step, long n);

void prelude_index_add_f32(float *out, const long long *idx, const float *grads,
                           long N, long d);
void prelude_index_add_f64(double *out, const long long *idx, const double *grads,
                           long N, long d);

#endif
