/**
 * Nadam (Adam with Nesterov momentum, Dozat 2016) — tfjs ships no Nadam
 * optimizer, so the update rule is applied manually:
 *
 *   m_t = b1*m + (1-b1)*g           v_t = b2*v + (1-b2)*g^2
 *   mhat = m_t / (1 - b1^(t+1))     vhat = v_t / (1 - b2^t)
 *   theta -= lr * (b1*mhat + (1-b1)*g/(1 - b1^t)) / (sqrt(vhat) + eps)
 */

import * as tf from "@tensorflow/tfjs";

export class Nadam {
  private m = new Map<string, tf.Variable>();
  private v = new Map<string, tf.Variable>();
  private step = 0;

  constructor(
    readonly learningRate = 1e-3,
    readonly beta1 = 0.9,
    readonly beta2 = 0.999,
    readonly epsilon = 1e-8,
  ) {}

  applyGradients(grads: tf.NamedTensorMap, vars: Record<string, tf.Variable>): void {
    this.step += 1;
    const t = this.step;
    const b1 = this.beta1;
    const b2 = this.beta2;
    const mCorr = 1 - Math.pow(b1, t + 1);
    const mCorrPrev = 1 - Math.pow(b1, t);
    const vCorr = 1 - Math.pow(b2, t);

    for (const name of Object.keys(grads)) {
      const g = grads[name];
      const variable = vars[name];
      if (!this.m.has(name)) {
        this.m.set(name, tf.variable(tf.zerosLike(variable), false));
        this.v.set(name, tf.variable(tf.zerosLike(variable), false));
      }
      const m = this.m.get(name)!;
      const v = this.v.get(name)!;
      tf.tidy(() => {
        const mNew = m.mul(b1).add(g.mul(1 - b1));
        const vNew = v.mul(b2).add(g.square().mul(1 - b2));
        m.assign(mNew as tf.Tensor);
        v.assign(vNew as tf.Tensor);
        const mHat = mNew.div(mCorr);
        const vHat = vNew.div(vCorr);
        const momentum = mHat.mul(b1).add(g.mul((1 - b1) / mCorrPrev));
        const update = momentum.mul(this.learningRate).div(vHat.sqrt().add(this.epsilon));
        variable.assign(variable.sub(update) as tf.Tensor);
      });
    }
  }

  dispose(): void {
    for (const m of this.m.values()) m.dispose();
    for (const v of this.v.values()) v.dispose();
    this.m.clear();
    this.v.clear();
  }
}
