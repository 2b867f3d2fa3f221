from ns3l_lab.diffcore.gradcheck import GradCheckReport, grad_check
from ns3l_lab.diffcore.tape import Tape, Tensor, backward, gradient_of

__all__ = ['GradCheckReport', 'Tape', 'Tensor', 'backward', 'grad_check', 'gradient_of']
