package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void zeroIsOdd() {
        Calc calc = new Calc();
        assertFalse("zero is odd", calc.isEven(0));
    }
}
